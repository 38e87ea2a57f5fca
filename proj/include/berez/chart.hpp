// Charts, retractions, coordinate systems, morphisms, and the change between
// standard coordinates and adapted slot coordinates.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "berez/quad.hpp"
#include "berez/super.hpp"

namespace berez {

struct Chart {
  int p = 0;
  int q = 0;
  std::vector<std::string> evars;  // even coordinate names
  std::vector<std::string> onames; // odd generator display names
  Region region;

  SuperNumber scalar(const ScalarExpr& e) const { return SuperNumber(q, e); }
  SuperNumber evar_sn(int i) const {
    return SuperNumber(q, ScalarExpr::var(evars[i]));
  }
  SuperNumber odd_sn(int j) const {
    SuperNumber r(q);
    r.set(1u << j, ScalarExpr(1.0));
    return r;
  }
};

Chart make_chart(int p, int q, std::vector<std::string> evars, Region region,
                 std::vector<std::string> onames = {});

// Retraction: even images whose body is the coordinate itself.
struct Retraction {
  std::vector<SuperNumber> images;
};

Retraction canonical_retraction(const Chart& chart);
void validate_retraction(const Chart& chart, const Retraction& r,
                         const Quadrature& quad, Rng& rng);

// Coordinate system given by its images in standard coordinates.
struct CoordSystem {
  std::string name;
  std::vector<SuperNumber> evens;
  std::vector<SuperNumber> odds;
};

CoordSystem standard_system(const Chart& chart, std::string name = "std");
CoordSystem shift_system(const Chart& chart, const Retraction& r,
                         std::string name);
bool odd_identity(const Chart& chart, const CoordSystem& sys);
bool body_identity(const Chart& chart, const CoordSystem& sys);
// retraction associated with a body-identity, odd-identity system
Retraction system_retraction(const Chart& chart, const CoordSystem& sys);

// body Jacobian is invertible on the sampled region
void validate_system(const Chart& chart, const CoordSystem& sys,
                     const Quadrature& quad, Rng& rng);

// Applies the algebra morphism u_i -> even_imgs[i], xi_j -> odd_imgs[j] to a
// function written in the target variables.
SuperNumber pullback_fn(const std::vector<std::string>& target_evars,
                        const std::vector<SuperNumber>& even_imgs,
                        const std::vector<SuperNumber>& odd_imgs,
                        const SuperNumber& f);

struct Morphism {
  const Chart* src = nullptr;
  const Chart* dst = nullptr;
  std::vector<SuperNumber> evens;  // images of dst coordinates over src
  std::vector<SuperNumber> odds;
};

SuperNumber pullback_fn(const Morphism& phi, const SuperNumber& f_on_dst);

// Inverse images of u_i -> u_i + nilpotent, xi fixed; the body must be the
// plain variable structurally.
std::vector<SuperNumber> invert_shift(const Chart& chart,
                                      const std::vector<SuperNumber>& images);

// replace the body coefficient by `expr` after checking agreement on samples
SuperNumber snap_body_to(const SuperNumber& x, const ScalarExpr& expr,
                         const std::vector<Env>& samples, double tol = 1e-8);

// Coefficients of f along a retraction: f = sum_nu gamma*(f_nu) xi^nu.
std::map<uint32_t, ScalarExpr> decompose(const Chart& chart,
                                         const SuperNumber& f,
                                         const Retraction& gamma);
SuperNumber recompose(const Chart& chart,
                      const std::map<uint32_t, ScalarExpr>& coeffs,
                      const Retraction& gamma);

// Adapted coordinate system: slot names with super forward images over the
// chart variables and a declared classical inverse over the slots.
struct AdaptedSystem {
  std::string name;
  std::vector<std::string> slots;    // p slot names
  std::vector<SuperNumber> forward;  // p even images over chart variables
  std::vector<ScalarExpr> inverse;   // p chart variables over the slots
};

AdaptedSystem identity_adapted(const Chart& chart, std::string name = "std");
AdaptedSystem shift_adapted(const Chart& chart, const Retraction& r,
                            std::string name);

// Rewrites functions between standard coordinates and adapted slots; the odd
// generators are untouched.  Needs region samples to certify the declared
// inverse.
class SlotView {
 public:
  SlotView(const Chart& chart, AdaptedSystem sys, const std::vector<Env>& samples);

  const Chart& chart() const { return *chart_; }
  const AdaptedSystem& sys() const { return sys_; }

  SuperNumber to_slots(const SuperNumber& f) const;    // coefficients over slots
  SuperNumber from_slots(const SuperNumber& g) const;  // coefficients over chart vars

  // derivative along the i-th system coordinate (combined index, evens first);
  // input and output are expressed over chart variables
  SuperNumber derive(const SuperNumber& f, int i) const;
  SuperNumber derive_multi(const SuperNumber& f, const MIdx& j) const;

  // same derivatives on functions already expressed over the slots
  SuperNumber derive_slot(const SuperNumber& g, int i) const;
  SuperNumber derive_multi_slot(const SuperNumber& g, const MIdx& j) const;

 private:
  const Chart* chart_;
  AdaptedSystem sys_;
  std::vector<SuperNumber> chi_;  // chart variables as functions of the slots
};

}  // namespace berez
