#include "berez/chart.hpp"

#include <cmath>

#include "berez/errors.hpp"

namespace berez {

Chart make_chart(int p, int q, std::vector<std::string> evars, Region region,
                 std::vector<std::string> onames) {
  if (int(evars.size()) != p) throw DimensionError("chart: evars size != p");
  if (onames.empty())
    for (int j = 0; j < q; ++j) onames.push_back("x" + std::to_string(j + 1));
  if (int(onames.size()) != q) throw DimensionError("chart: onames size != q");
  Chart c;
  c.p = p;
  c.q = q;
  c.evars = std::move(evars);
  c.onames = std::move(onames);
  c.region = std::move(region);
  return c;
}

Retraction canonical_retraction(const Chart& chart) {
  Retraction r;
  for (int i = 0; i < chart.p; ++i) r.images.push_back(chart.evar_sn(i));
  return r;
}

void validate_retraction(const Chart& chart, const Retraction& r,
                         const Quadrature& quad, Rng& rng) {
  if (int(r.images.size()) != chart.p)
    throw DimensionError("retraction: wrong number of images");
  auto samples = quad.sample_points(chart.region, 16, rng);
  for (int i = 0; i < chart.p; ++i) {
    if (r.images[i].parity() != Parity::Even)
      throw ParityError("retraction image " + std::to_string(i) + " is not even");
    for (const Env& env : samples) {
      double b = r.images[i].body().eval(env);
      double v = env.at(chart.evars[i]);
      if (std::abs(b - v) > 1e-9 * std::max(1.0, std::abs(v)))
        throw DomainError("retraction image body differs from the coordinate");
    }
  }
}

CoordSystem standard_system(const Chart& chart, std::string name) {
  CoordSystem s;
  s.name = std::move(name);
  for (int i = 0; i < chart.p; ++i) s.evens.push_back(chart.evar_sn(i));
  for (int j = 0; j < chart.q; ++j) s.odds.push_back(chart.odd_sn(j));
  return s;
}

CoordSystem shift_system(const Chart& chart, const Retraction& r,
                         std::string name) {
  CoordSystem s = standard_system(chart, std::move(name));
  s.evens = r.images;
  return s;
}

bool odd_identity(const Chart& chart, const CoordSystem& sys) {
  if (int(sys.odds.size()) != chart.q) return false;
  for (int j = 0; j < chart.q; ++j) {
    const auto& t = sys.odds[j].terms();
    if (t.size() != 1) return false;
    auto it = t.begin();
    if (it->first != (1u << j) || !it->second.is_one()) return false;
  }
  return true;
}

bool body_identity(const Chart& chart, const CoordSystem& sys) {
  if (int(sys.evens.size()) != chart.p) return false;
  for (int i = 0; i < chart.p; ++i)
    if (!structurally_equal(sys.evens[i].body(),
                            ScalarExpr::var(chart.evars[i])))
      return false;
  return true;
}

Retraction system_retraction(const Chart& chart, const CoordSystem& sys) {
  if (!odd_identity(chart, sys) || !body_identity(chart, sys))
    throw UnsupportedSystem(
        "associated retraction needs a body-identity, odd-identity system");
  Retraction r;
  r.images = sys.evens;
  return r;
}

void validate_system(const Chart& chart, const CoordSystem& sys,
                     const Quadrature& quad, Rng& rng) {
  if (int(sys.evens.size()) != chart.p || int(sys.odds.size()) != chart.q)
    throw DimensionError("system: wrong number of images");
  for (const auto& e : sys.evens)
    if (e.parity() != Parity::Even)
      throw ParityError("system: even image with odd components");
  for (const auto& o : sys.odds)
    if (o.parity() != Parity::Odd)
      throw ParityError("system: odd image with even components");
  // body Jacobian must be invertible where we integrate
  std::vector<ScalarExpr> jac;
  for (int i = 0; i < chart.p; ++i)
    for (int j = 0; j < chart.p; ++j)
      jac.push_back(sys.evens[j].body().diff(chart.evars[i]));
  auto samples = quad.sample_points(chart.region, 16, rng);
  for (const Env& env : samples) {
    // Gaussian elimination on the evaluated matrix
    int n = chart.p;
    std::vector<double> m(size_t(n) * n);
    for (size_t k = 0; k < m.size(); ++k) m[k] = jac[k].eval(env);
    double det = 1.0;
    for (int c = 0; c < n; ++c) {
      int piv = c;
      for (int r2 = c + 1; r2 < n; ++r2)
        if (std::abs(m[r2 * n + c]) > std::abs(m[piv * n + c])) piv = r2;
      if (piv != c)
        for (int k = 0; k < n; ++k) {
          std::swap(m[piv * n + k], m[c * n + k]);
        }
      det *= m[c * n + c];
      if (m[c * n + c] == 0.0) break;
      for (int r2 = c + 1; r2 < n; ++r2) {
        double f = m[r2 * n + c] / m[c * n + c];
        for (int k = c; k < n; ++k) m[r2 * n + k] -= f * m[c * n + k];
      }
    }
    if (std::abs(det) < 1e-12)
      throw DomainError("system: body Jacobian is singular on the region");
  }
}

SuperNumber pullback_fn(const std::vector<std::string>& target_evars,
                        const std::vector<SuperNumber>& even_imgs,
                        const std::vector<SuperNumber>& odd_imgs,
                        const SuperNumber& f) {
  int qsrc = even_imgs.empty() ? (odd_imgs.empty() ? f.q() : odd_imgs[0].q())
                               : even_imgs[0].q();
  SuperNumber out(qsrc);
  for (const auto& [mask, c] : f.terms()) {
    SuperNumber prod(qsrc, ScalarExpr(1.0));
    for (int j = 0; (1u << j) <= mask; ++j)
      if (mask & (1u << j)) {
        if (j >= int(odd_imgs.size()))
          throw DimensionError("pullback_fn: generator index out of range");
        prod = prod * odd_imgs[j];
      }
    out = out + compose_scalar(c, target_evars, even_imgs) * prod;
  }
  return out;
}

SuperNumber pullback_fn(const Morphism& phi, const SuperNumber& f_on_dst) {
  return pullback_fn(phi.dst->evars, phi.evens, phi.odds, f_on_dst);
}

std::vector<SuperNumber> invert_shift(const Chart& chart,
                                      const std::vector<SuperNumber>& images) {
  if (int(images.size()) != chart.p)
    throw DimensionError("invert_shift: wrong number of images");
  std::vector<SuperNumber> souls;
  for (int i = 0; i < chart.p; ++i) {
    if (!structurally_equal(images[i].body(), ScalarExpr::var(chart.evars[i])))
      throw UnsupportedSystem("invert_shift: image body is not the coordinate");
    if (images[i].parity() != Parity::Even)
      throw ParityError("invert_shift: image is not even");
    souls.push_back(images[i].soul());
  }
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < chart.q; ++j) odd_id.push_back(chart.odd_sn(j));
  std::vector<SuperNumber> psi;
  for (int i = 0; i < chart.p; ++i) psi.push_back(chart.evar_sn(i));
  for (int t = 0; t <= chart.q / 2; ++t) {
    std::vector<SuperNumber> next;
    for (int i = 0; i < chart.p; ++i)
      next.push_back(chart.evar_sn(i) -
                     pullback_fn(chart.evars, psi, odd_id, souls[i]));
    psi = std::move(next);
  }
  return psi;
}

SuperNumber snap_body_to(const SuperNumber& x, const ScalarExpr& expr,
                         const std::vector<Env>& samples, double tol) {
  for (const Env& env : samples) {
    double a = x.body().eval(env);
    double b = expr.eval(env);
    if (std::abs(a - b) > tol * std::max({1.0, std::abs(a), std::abs(b)}))
      throw DomainError("snap_body_to: values disagree on samples");
  }
  SuperNumber r = x;
  r.set(0, expr);
  return r;
}

std::map<uint32_t, ScalarExpr> decompose(const Chart& chart,
                                         const SuperNumber& f,
                                         const Retraction& gamma) {
  std::vector<SuperNumber> inv = invert_shift(chart, gamma.images);
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < chart.q; ++j) odd_id.push_back(chart.odd_sn(j));
  return pullback_fn(chart.evars, inv, odd_id, f).terms();
}

SuperNumber recompose(const Chart& chart,
                      const std::map<uint32_t, ScalarExpr>& coeffs,
                      const Retraction& gamma) {
  SuperNumber f(chart.q);
  for (const auto& [m, c] : coeffs) f.set(m, c);
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < chart.q; ++j) odd_id.push_back(chart.odd_sn(j));
  return pullback_fn(chart.evars, gamma.images, odd_id, f);
}

AdaptedSystem identity_adapted(const Chart& chart, std::string name) {
  AdaptedSystem s;
  s.name = std::move(name);
  s.slots = chart.evars;
  for (int i = 0; i < chart.p; ++i) {
    s.forward.push_back(chart.evar_sn(i));
    s.inverse.push_back(ScalarExpr::var(chart.evars[i]));
  }
  return s;
}

AdaptedSystem shift_adapted(const Chart& chart, const Retraction& r,
                            std::string name) {
  AdaptedSystem s = identity_adapted(chart, std::move(name));
  s.forward = r.images;
  return s;
}

SlotView::SlotView(const Chart& chart, AdaptedSystem sys,
                   const std::vector<Env>& samples)
    : chart_(&chart), sys_(std::move(sys)) {
  const int p = chart.p;
  if (int(sys_.slots.size()) != p || int(sys_.forward.size()) != p ||
      int(sys_.inverse.size()) != p)
    throw DimensionError("adapted system: sizes must match p");
  for (const auto& im : sys_.forward)
    if (im.parity() != Parity::Even)
      throw ParityError("adapted system: forward image is not even");

  // nu_i = inverse_i(forward images): body-identity after a verified snap
  std::vector<SuperNumber> nu;
  for (int i = 0; i < p; ++i) {
    SuperNumber n = compose_scalar(sys_.inverse[i], sys_.slots, sys_.forward);
    nu.push_back(snap_body_to(n, ScalarExpr::var(chart.evars[i]), samples));
  }
  std::vector<SuperNumber> mu = invert_shift(chart, nu);
  // classical substitution u -> inverse(w) in every coefficient
  std::map<std::string, ScalarExpr> repl;
  for (int i = 0; i < p; ++i) repl[chart.evars[i]] = sys_.inverse[i];
  for (int i = 0; i < p; ++i) {
    SuperNumber chi(chart.q);
    for (const auto& [m, c] : mu[i].terms()) chi.set(m, c.subst(repl));
    chi_.push_back(chi);
  }
}

SuperNumber SlotView::to_slots(const SuperNumber& f) const {
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < chart_->q; ++j) odd_id.push_back(chart_->odd_sn(j));
  return pullback_fn(chart_->evars, chi_, odd_id, f);
}

SuperNumber SlotView::from_slots(const SuperNumber& g) const {
  std::vector<SuperNumber> odd_id;
  for (int j = 0; j < chart_->q; ++j) odd_id.push_back(chart_->odd_sn(j));
  return pullback_fn(sys_.slots, sys_.forward, odd_id, g);
}

SuperNumber SlotView::derive(const SuperNumber& f, int i) const {
  return from_slots(derive_slot(to_slots(f), i));
}

SuperNumber SlotView::derive_multi(const SuperNumber& f, const MIdx& j) const {
  return from_slots(derive_multi_slot(to_slots(f), j));
}

SuperNumber SlotView::derive_slot(const SuperNumber& g, int i) const {
  return i < chart_->p ? sderiv_even(g, sys_.slots[i])
                       : sderiv_odd(g, i - chart_->p);
}

SuperNumber SlotView::derive_multi_slot(const SuperNumber& g, const MIdx& j) const {
  if (int(j.size()) != chart_->p + chart_->q)
    throw DimensionError("derive_multi: index length");
  SuperNumber r = g;
  // the first coordinate's derivative acts first
  for (int i = 0; i < chart_->p + chart_->q; ++i)
    for (int k = 0; k < j[i]; ++k) r = derive_slot(r, i);
  return r;
}

}  // namespace berez
