// Boundary geometry with corners: a family of boundary functions cutting the
// chart region, their vanishing faces with adapted coordinates, restriction
// of densities to faces, retractions induced on faces, and the change of
// retraction formula with one boundary term per face and multi-index.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "berez/density.hpp"

namespace berez {

// A face of the corner stratification: the locus where the boundary
// superfunctions indexed by S vanish.  The adapted system lists those
// superfunctions as its leading slots (ascending S order) followed by p-k
// transverse slots whose restrictions are coordinates on the face; box
// bounds the transverse slots.  Restricted densities live on the face chart
// built from the transverse slots and integrate over box directly.
struct Face {
  std::vector<int> S;  // ascending indices into the boundary family
  AdaptedSystem sys;   // leading slots: the vanishing superfunctions
  std::vector<std::array<double, 2>> box;  // transverse slot ranges
  double thick = 0.2;  // leading slots range in (0, thick] near the face
};

int face_codim(const Face& face);

// chart with the transverse slots as coordinates over box (odd part shared)
Chart face_chart(const Chart& chart, const Face& face);

// base-point expressions of the transverse slots: the system inverse with
// the leading slots set to zero
std::vector<ScalarExpr> face_param(const Chart& chart, const Face& face);

// ambient chart samples near the face (leading slots small positive,
// transverse slots in box)
std::vector<Env> near_face_samples(const Chart& chart, const Face& face,
                                   Rng& rng, int k = 16);
// samples over the face chart variables
std::vector<Env> on_face_samples(const Chart& chart, const Face& face,
                                 Rng& rng, int k = 16);

// Corner data on a chart: n boundary functions rho > 0 on the interior, n
// even lifts tau with body(tau_i) = rho_i, the declared faces, and n
// boundary derivations D with D_i(tau_j) = delta_ij wherever the validity
// boxes of D_i and D_j overlap.  Validity boxes live over the region
// parameters; an empty overlap waives the condition for that pair.
struct CornerData {
  std::vector<ScalarExpr> rho;
  std::vector<SuperNumber> tau;
  std::vector<Face> faces;
  std::vector<DiffOp> D;
  std::vector<std::vector<std::array<double, 2>>> dvalid;
};

// InvalidCorner when a tau body disagrees with rho, a face system is not led
// by the vanishing superfunctions, rho has the wrong sign along a face, a
// vanishing family is dependent at a face point, or a delta condition fails;
// NotDerivation when some D_i has a term of order != 1.
void validate_corners(const Chart& chart, const CornerData& cd,
                      const Quadrature& quad, Rng& rng);

// Indices supported exactly on face.S with 0 < |j| <= q/2, lexicographic;
// jdown lowers every positive entry by one.  Entries of j beyond order q/2
// would multiply by a vanishing power of a soul, so the cap loses nothing.
struct IndexPair {
  MIdx j;
  MIdx jdown;
};
std::vector<IndexPair> enumerate_indices(const Face& face, int n, int q);

// Restriction to the face: the density coefficient in the adapted system
// with the leading slots set to zero, as a density on the face chart.
// NoAdaptedCoordinates when the declared system fails to view the chart.
BerezinDensity restrict_density(const BerezinDensity& w, const Face& face,
                                const std::vector<Env>& ambient_samples);

// The retraction on the face whose composition with the face inclusion
// matches gamma: its images pull the transverse base functions back along
// gamma and restrict.  NoAdaptedCoordinates as above.
Retraction induced_retraction(const Chart& chart, const Retraction& gamma,
                              const Face& face,
                              const std::vector<Env>& ambient_samples);

// One boundary term of the transformation formula.
struct CornerTerm {
  int face = 0;   // index into cd.faces
  MIdx j;         // over the boundary family
  MIdx jdown;
  double value = 0.0;       // face route, sign included
  double value_base = 0.0;  // base route: fibre integral first, no sign
};

struct BoundaryDecomposition {
  double bulk = 0.0;  // integral against gamma
  std::vector<CornerTerm> terms;
  std::vector<std::string> warnings;  // boundary decay findings, non-fatal
  double boundary() const;
  double boundary_base() const;
  double total() const { return bulk + boundary(); }
  double total_base() const { return bulk + boundary_base(); }
};

// The integral against gamma_prime as the integral against gamma plus one
// term per face H and index j: (-1)^{s(dim N) + s(dim H)} times the face
// integral, against the induced retraction, of the restriction of
// ((1/j!) prod_i (gamma_prime*(rho_i) - gamma*(rho_i))^{j_i} . w) . D^{jdown}
// where the D_i act in ascending i order.  value_base evaluates the same
// term with the fibre integral taken first and the body reductions of the
// D_i acting on the base density; both routes must agree termwise.
// Requires tau = gamma*(rho).  A density that fails to vanish near region
// boundary parts not covered by a declared face is recorded as a warning.
BoundaryDecomposition change_of_vars_corners(const BerezinDensity& w,
                                             const Retraction& gamma,
                                             const Retraction& gamma_prime,
                                             const CornerData& cd,
                                             const Quadrature& quad, Rng& rng);

}  // namespace berez
