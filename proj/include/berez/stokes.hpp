// Integral forms of top codegree: frame changes, the Cartan differential,
// pullback to codimension-one faces, fibre integration down to classical
// forms, and the two boundary identities relating bulk and face integrals.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "berez/corners.hpp"
#include "berez/density.hpp"

namespace berez {

// sum_i comp[i] Dx (x) d/dx_i Pi over the standard frame, evens first.  Every
// nonzero component must be parity-homogeneous with |comp[i]| + |x_i| equal
// to the stored parity.
struct IntegralForm {
  Chart chart;
  std::vector<SuperNumber> comp;  // p + q components
  int parity = 0;                 // |comp[i]| + |x_i| mod 2
  Convention conv;
};

// ParityError when a component is mixed or the combined parities disagree
IntegralForm make_integral_form(const Chart& chart,
                                std::vector<SuperNumber> comp,
                                Convention conv = {});

// Components of the same form with respect to the frame of the view's
// system, coefficients written over the slots.  The volume factor and the
// frame mixing both enter; a round trip through form_from_frame is the
// identity.
std::vector<SuperNumber> form_to_frame(const IntegralForm& w,
                                       const SystemView& sysv);
IntegralForm form_from_frame(const Chart& chart, const SystemView& sysv,
                             const std::vector<SuperNumber>& comp_slots,
                             int parity, Convention conv = {});

// d(omega (x) X Pi) = (-1)^{|omega||X Pi|} L_X omega summed over the frame;
// the result transforms as a signed volume element.
BerezinDensity cartan_d(const IntegralForm& w);

// Classical differential forms over named base coordinates: ascending index
// tuples into vars mapped to coefficients.
struct ClassicalForm {
  std::vector<std::string> vars;
  int degree = 0;
  std::map<std::vector<int>, ScalarExpr> comp;
};

ClassicalForm exterior_d(const ClassicalForm& w);
// substitute vars = images(params) and contract with the minor determinants
ClassicalForm pullback_form(const ClassicalForm& w,
                            const std::vector<std::string>& params,
                            const std::vector<ScalarExpr>& images);
// top-degree integral over the region in coordinate order
double integrate_form(const ClassicalForm& w, const Region& region,
                      const Quadrature& quad);

// Pullback to a codimension-one face: the component along the leading slot
// of the face system, restricted to the face, carrying the parity sign of
// the ambient volume element.  NoAdaptedCoordinates as for densities.
BerezinDensity pullback_integral_form(const IntegralForm& w, const Face& face,
                                      const std::vector<Env>& ambient_samples);

// Fibre integration of the even-frame components along gamma, contracted to
// a classical form of degree p - 1 on the base; odd-frame components drop.
ClassicalForm fibre_integral_form(const IntegralForm& w,
                                  const Retraction& gamma,
                                  const std::vector<Env>& samples);

// Boundary orientation factor for integrating over the face box in slot
// order: the face frame counts positive when the outward normal followed by
// the transverse frame matches base_orient.  The leading slot grows inward,
// so the sign is -base_orient times the sampled sign of the parametrization
// Jacobian; SignAmbiguous when that sign is not constant.
double face_orientation(const Chart& chart, const Face& face,
                        double base_orient, Rng& rng);

// A smooth boundary piece; orient == 0 means derive it from the face
// parametrization via face_orientation.
struct OrientedFace {
  Face face;
  double orient = 0.0;
};

struct StokesReport {
  double bulk = 0.0;              // integral of the Cartan differential
  std::vector<double> face_vals;  // oriented pullback integrals
  double boundary = 0.0;          // their sum
  double sign = 1.0;              // (-1)^{s(p,q)+s(p-1,q)+q}
  double residual = 0.0;          // bulk - sign * boundary
};

// The bulk integral of d(w) against gamma equals sign times the boundary
// sum.  Every face must be led by the gamma pullback of its own body
// (InvalidCorner otherwise); the face integrals run against the induced
// retraction.
StokesReport verify_stokes(const IntegralForm& w, const Retraction& gamma,
                           const std::vector<OrientedFace>& faces,
                           double base_orient, const Quadrature& quad,
                           Rng& rng);

// A boundary piece with a free vanishing superfunction tau (the leading
// slot of the face system, any even lift of its body) and a derivation D
// with D(tau) = 1 near the face.  D may be left empty when q < 4.
struct GeneralBoundary {
  Face face;
  DiffOp D;
  double orient = 0.0;
};

struct StokesGeneralReport {
  double lhs = 0.0;            // integral of d(w) against gamma_prime
  std::vector<double> iota;    // oriented pullback integral per piece
  std::vector<std::vector<double>> corrections;  // per piece, j = 1..q/2
  double sign = 1.0;           // (-1)^{s(p,q)+s(p-1,q)}
  double rhs = 0.0;
  double residual = 0.0;       // lhs - rhs
};

// lhs = sign * ((-1)^q sum iota - sum corrections) where correction j of a
// piece is the oriented face integral of the restriction of
// ((1/j!) (gamma_prime*(tau_0) - tau)^j d(w)) . D^{j-1}.  The retraction
// enters only through the left hand side.
StokesGeneralReport stokes_general(const IntegralForm& w,
                                   const Retraction& gamma_prime,
                                   const std::vector<GeneralBoundary>& pieces,
                                   double base_orient, const Quadrature& quad,
                                   Rng& rng);

}  // namespace berez
