// Berezin densities and integral-form coefficients on a chart: sign
// conventions, supermatrices and their Berezinians, coordinate transforms,
// fibre integration along a retraction, and right actions of differential
// operators.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "berez/chart.hpp"
#include "berez/quad.hpp"
#include "berez/super.hpp"

namespace berez {

// ---------------------------------------------------------------------------
// Sign conventions.  s(p,q) governs fibre integration, b(p,q) the parity tag
// of a density; the defaults make the boundary formulas sign-free.

enum class SMode { Default, PqOnly, HalfQ };
enum class BMode { PPlusQ, Zero };

struct Convention {
  SMode smode = SMode::Default;
  BMode bmode = BMode::PPlusQ;

  int s(int p, int q) const;
  int b(int p, int q) const;
  int s_sign(int p, int q) const { return s(p, q) % 2 ? -1 : 1; }
  int b_sign(int p, int q) const { return b(p, q) % 2 ? -1 : 1; }

  // names: "default" | "pq-only" | "half-q"
  static Convention parse(const std::string& name);
  std::string str() const;
};

// ---------------------------------------------------------------------------
// Supermatrices over the Grassmann coefficient algebra.  Rows and columns are
// ordered even-block first; entry (i,j) must have parity |i|+|j|.

struct SuperMatrix {
  int pdim = 0;
  int qdim = 0;
  int qgen = 0;  // odd generators of the coefficient algebra
  std::vector<std::vector<SuperNumber>> a;

  int n() const { return pdim + qdim; }
  bool row_odd(int i) const { return i >= pdim; }
};

SuperMatrix identity_matrix(int pdim, int qdim, int qgen);
void validate_blocks(const SuperMatrix& m);  // ParityError
SuperMatrix mat_mul(const SuperMatrix& x, const SuperMatrix& y);
// inverse via blockwise body inversion and a nilpotent Neumann series
SuperMatrix mat_inverse(const SuperMatrix& m);

// Determinant of a square matrix of even elements: cofactor determinant of
// the body times a correction factor obtained from truncated log/exp trace
// series of the nilpotent part.  The body inverse uses a symbolic adjugate,
// so the size is capped at 6 (DimensionError beyond).
SuperNumber even_det(const std::vector<std::vector<SuperNumber>>& m, int qgen);

// Ber(M) = det(R - S V^{-1} T) det(V)^{-1}.  SingularV when the V block has
// a structurally singular body.
SuperNumber ber(const SuperMatrix& m);
// sign of the body sampled at the given points; SignAmbiguous if inconsistent
SuperNumber abs_ber(const SuperMatrix& m, const std::vector<Env>& samples);

// matrix of derivatives of coordinate images along the standard coordinates;
// images = p even then q odd supernumbers over standard coordinates
SuperMatrix system_matrix(const Chart& chart,
                          const std::vector<SuperNumber>& images);

// Jacobian supernumber D x/y of one image system with respect to another,
// expressed over standard coordinates: Ber(A_y^{-1} A_x).
SuperNumber jacobian_ber(const Chart& chart,
                         const std::vector<SuperNumber>& x_images,
                         const std::vector<SuperNumber>& y_images);
SuperNumber jacobian_abs_ber(const Chart& chart,
                             const std::vector<SuperNumber>& x_images,
                             const std::vector<SuperNumber>& y_images,
                             const std::vector<Env>& samples);

// ---------------------------------------------------------------------------
// Densities.  Both kinds share one type: Density transforms with |Ber|,
// Form with the signed Ber.  The coefficient is the left coefficient with
// respect to the chart's standard coordinates.

enum class DKind { Density, Form };

struct BerezinDensity {
  Chart chart;
  DKind kind = DKind::Density;
  SuperNumber f;
  Convention conv;
};

BerezinDensity make_density(const Chart& chart, DKind kind,
                            const SuperNumber& f_std, Convention conv = {});

// A coordinate system together with everything needed to move densities,
// functions, and operators between it and the standard coordinates.
class SystemView {
 public:
  SystemView(const Chart& chart, AdaptedSystem sys,
             const std::vector<Env>& samples);
  // the slot view holds a pointer to the chart member
  SystemView(const SystemView&) = delete;
  SystemView& operator=(const SystemView&) = delete;

  const Chart& chart() const { return chart_; }
  const SlotView& slots() const { return view_; }
  const AdaptedSystem& sys() const { return view_.sys(); }
  const std::vector<Env>& samples() const { return samples_; }

  // D sys/std over standard coordinates, signed or with sampled sign
  const SuperNumber& factor(DKind kind) const;

  // density coefficients
  SuperNumber to_system(const SuperNumber& f_std, DKind kind) const;
  SuperNumber to_std(const SuperNumber& f_sys, DKind kind) const;
  // plain functions
  SuperNumber fn_to_system(const SuperNumber& h_std) const;
  SuperNumber fn_to_std(const SuperNumber& h_sys) const;

 private:
  Chart chart_;
  SlotView view_;
  std::vector<Env> samples_;
  SuperNumber factor_signed_;
  SuperNumber factor_abs_;
};

using SystemViewPtr = std::shared_ptr<const SystemView>;

SystemViewPtr view_for_retraction(const Chart& chart, const Retraction& gamma,
                                  const std::vector<Env>& samples,
                                  std::string name = "shift");
SystemViewPtr view_for_standard(const Chart& chart,
                                const std::vector<Env>& samples);

// interior sample points of the chart region
std::vector<Env> region_samples(const Chart& chart, const Quadrature& quad,
                                Rng& rng, int k = 16);

// ---------------------------------------------------------------------------
// Fibre integration along a retraction: the scalar density on the base.

struct VolumeDensity {
  std::vector<std::string> vars;
  ScalarExpr g;
  Region region;
};

VolumeDensity fibre_integral(const BerezinDensity& w, const Retraction& gamma);
double integrate_berezin(const BerezinDensity& w, const Retraction& gamma,
                         const Quadrature& quad);

// coefficient of the density in the shift system of gamma (its
// gamma-decomposition with the transformation factor included)
SuperNumber coefficient_along(const BerezinDensity& w, const SystemView& sysv);

// ---------------------------------------------------------------------------
// Differential operators acting on densities from the right.  Terms map a
// combined multi-index over the system coordinates (evens first, odd entries
// at most 1) to a coefficient written over the system's slots.

struct DiffOp {
  SystemViewPtr sysv;
  std::map<MIdx, SuperNumber> terms;
};

void validate_op(const DiffOp& op);  // DimensionError on malformed indices

// w.A per the sign rule (-1)^{|j| + |h||j_odd|} with h the right coefficient
// times a_j and derivatives applied first coordinate first; ParityError when
// an odd derivative meets a parity-mixed h.
BerezinDensity act(const BerezinDensity& w, const DiffOp& op);

// operator applied to a plain function, standard coordinates in and out
SuperNumber apply_op(const DiffOp& op, const SuperNumber& h_std);

// right multiplication of a density by a function
BerezinDensity times_function(const BerezinDensity& w, const SuperNumber& h_std);

// Lie derivative along a first-order operator; NotDerivation if op has any
// term of order != 1
BerezinDensity lie_derivative(const BerezinDensity& w, const DiffOp& X);

// the pullback along the identity morphism between the retractions gamma and
// gamma_prime, as an operator sum_i (1/i!) (gamma_prime*(u) - gamma*(u))^i d^i
DiffOp morphism_as_diffop(const SystemViewPtr& gamma_view,
                          const Retraction& gamma,
                          const Retraction& gamma_prime);

// ---------------------------------------------------------------------------
// Local change of retraction: the bulk term plus correction terms indexed by
// even multi-indices i != 0.

struct CovTerm {
  MIdx i;                // over even coordinates only
  BerezinDensity term;   // integrand against gamma
};

struct CovLocal {
  BerezinDensity base;
  std::vector<CovTerm> corrections;
};

CovLocal change_of_vars_local(const BerezinDensity& w, const Retraction& gamma,
                              const Retraction& gamma_prime,
                              const std::vector<Env>& samples);

}  // namespace berez
