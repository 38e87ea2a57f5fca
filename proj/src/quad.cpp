#include "berez/quad.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>

#include "berez/errors.hpp"

namespace berez {

Region box_region(std::vector<std::string> vars,
                  std::vector<std::array<double, 2>> box) {
  Region r;
  r.params = std::move(vars);
  r.box = std::move(box);
  return r;
}

Quadrature::Quadrature(int order) : order_(order) {
  if (order < 1) throw DimensionError("quadrature order must be positive");
  std::unique_ptr<gsl_integration_glfixed_table,
                  void (*)(gsl_integration_glfixed_table*)>
      table(gsl_integration_glfixed_table_alloc(size_t(order)),
            gsl_integration_glfixed_table_free);
  x_.resize(order);
  w_.resize(order);
  for (int i = 0; i < order; ++i) {
    double xi, wi;
    gsl_integration_glfixed_point(-1.0, 1.0, size_t(i), &xi, &wi, table.get());
    x_[i] = xi;
    w_[i] = wi;
  }
}

namespace {

// |det| by Gaussian elimination with partial pivoting
double abs_det(std::vector<double> m, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) return 0.0;
    if (piv != c)
      for (int k = 0; k < n; ++k) std::swap(m[piv * n + k], m[c * n + k]);
    det *= m[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      double f = m[r * n + c] / m[c * n + c];
      for (int k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return std::abs(det);
}

struct MapEval {
  std::vector<CompiledExpr> fns;
  std::vector<CompiledExpr> jac;  // row-major d map_i / d param_j
  int n = 0;

  MapEval(const Region& r) {
    if (r.map.empty()) return;
    n = int(r.map.size());
    if (n != r.dim() || int(r.target_vars.size()) != n)
      throw DimensionError("region map must be square");
    for (const auto& e : r.map) fns.emplace_back(e, r.params);
    for (const auto& e : r.map)
      for (const auto& p : r.params) jac.emplace_back(e.diff(p), r.params);
  }

  // applies the map in-place; returns the Jacobian factor
  double apply(const std::vector<double>& par, std::vector<double>& out,
               bool require_regular) const {
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = fns[i].eval(par.data());
    std::vector<double> m(size_t(n) * n);
    for (size_t k = 0; k < m.size(); ++k) m[k] = jac[k].eval(par.data());
    double det = abs_det(std::move(m), n);
    if (require_regular && det == 0.0)
      throw NodeSingularity("map Jacobian vanishes at a quadrature node");
    return det;
  }
};

}  // namespace

double Quadrature::integrate(const ScalarExpr& f, const Region& r) const {
  const int d = r.dim();
  if (int(r.box.size()) != d) throw DimensionError("region box/params mismatch");
  if (r.mask && !r.map.empty())
    throw DimensionError("mask and map are mutually exclusive per region");
  for (int i = 0; i < d; ++i)
    if (!(r.box[i][0] < r.box[i][1]))
      throw DimensionError("region box must have lo < hi per axis");
  MapEval me(r);
  CompiledExpr cf(f, r.vars());
  std::optional<CompiledExpr> cmask;
  if (r.mask) cmask.emplace(*r.mask, r.map.empty() ? r.params : r.target_vars);

  std::vector<int> idx(d, 0);
  std::vector<double> par(d), pt;
  double total = 0.0;
  while (true) {
    double wt = 1.0;
    for (int i = 0; i < d; ++i) {
      double lo = r.box[i][0], hi = r.box[i][1];
      par[i] = 0.5 * (hi - lo) * x_[idx[i]] + 0.5 * (hi + lo);
      wt *= 0.5 * (hi - lo) * w_[idx[i]];
    }
    const std::vector<double>* eval_pt = &par;
    if (me.n > 0) {
      wt *= me.apply(par, pt, /*require_regular=*/true);
      eval_pt = &pt;
    }
    bool keep = true;
    if (cmask) keep = cmask->eval(eval_pt->data()) > 0.0;
    if (keep) {
      double v = cf.eval(eval_pt->data());
      if (!std::isfinite(v))
        throw NonFinite("integrand is not finite at a quadrature node");
      total += wt * v;
    }

    int i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < order_) break;
      idx[i] = 0;
    }
    if (i == d) break;  // also terminates immediately for d == 0
  }
  return total;
}

double Quadrature::volume(const Region& r) const {
  return integrate(ScalarExpr(1.0), r);
}

std::vector<Env> Quadrature::sample_points(const Region& r, int k,
                                           Rng& rng) const {
  MapEval me(r);
  std::optional<CompiledExpr> cmask;
  if (r.mask) cmask.emplace(*r.mask, r.map.empty() ? r.params : r.target_vars);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Env> out;
  std::vector<double> par(r.dim()), pt;
  int attempts = 0;
  while (int(out.size()) < k) {
    if (++attempts > 1000 * (k + 1))
      throw DomainError("sample_points: mask rejects almost everything");
    for (int i = 0; i < r.dim(); ++i)
      par[i] = r.box[i][0] + (r.box[i][1] - r.box[i][0]) * uni(rng);
    const std::vector<double>* eval_pt = &par;
    if (me.n > 0) {
      me.apply(par, pt, /*require_regular=*/false);
      eval_pt = &pt;
    }
    if (cmask && cmask->eval(eval_pt->data()) <= 0.0) continue;
    Env env;
    for (int i = 0; i < r.dim(); ++i) env[r.params[i]] = par[i];
    if (me.n > 0)
      for (int i = 0; i < me.n; ++i) env[r.target_vars[i]] = (*eval_pt)[i];
    out.push_back(std::move(env));
  }
  return out;
}

}  // namespace berez
