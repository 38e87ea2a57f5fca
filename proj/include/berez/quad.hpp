// Tensor-product Gauss-Legendre quadrature over boxes, with optional smooth
// coordinate maps (Jacobian applied automatically) and indicator masks.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "berez/scalar.hpp"

namespace berez {

struct Region {
  std::vector<std::string> params;
  std::vector<std::array<double, 2>> box;
  // optional smooth map from params to the chart variables; identity if empty
  std::vector<std::string> target_vars;
  std::vector<ScalarExpr> map;
  // optional indicator: points with mask <= 0 are skipped
  std::optional<ScalarExpr> mask;

  const std::vector<std::string>& vars() const {
    return map.empty() ? params : target_vars;
  }
  int dim() const { return int(params.size()); }
};

Region box_region(std::vector<std::string> vars,
                  std::vector<std::array<double, 2>> box);

class Quadrature {
 public:
  explicit Quadrature(int order = 32);
  int order() const { return order_; }

  // integrates an expression in the region's target variables
  double integrate(const ScalarExpr& f, const Region& r) const;
  double volume(const Region& r) const;

  // random interior points, bound to the target variables (and the raw
  // parameters when a map is present)
  std::vector<Env> sample_points(const Region& r, int k, Rng& rng) const;

 private:
  int order_;
  std::vector<double> x_, w_;  // nodes and weights on [-1, 1]
};

}  // namespace berez
