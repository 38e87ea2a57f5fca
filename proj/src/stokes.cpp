#include "berez/stokes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <utility>

#include "berez/errors.hpp"

namespace berez {

namespace {

// substitute one slot by zero in every coefficient
SuperNumber zero_slot(const SuperNumber& g, const std::string& slot) {
  std::map<std::string, ScalarExpr> repl;
  repl.emplace(slot, ScalarExpr(0.0));
  SuperNumber out(g.q());
  for (const auto& [mask, c] : g.terms()) out.set(mask, c.subst(repl));
  return out;
}

// std-representative components over the frame of the view's system.  The
// chain rule moves a coefficient of mixed parity across the frame vector and
// the volume element, so the mixing sign applies when the frame direction
// and the standard direction differ in parity and the volume element is
// even.
std::vector<SuperNumber> frame_components_std(const IntegralForm& w,
                                              const SystemView& sysv) {
  const Chart& ch = sysv.chart();
  if (w.chart.p != ch.p || w.chart.q != ch.q)
    throw DimensionError("form and view live on different charts");
  const int n = ch.p + ch.q;

  std::vector<SuperNumber> images = sysv.sys().forward;
  for (int j = 0; j < ch.q; ++j) images.push_back(ch.odd_sn(j));
  SuperMatrix a = system_matrix(ch, images);
  SuperNumber invfac = invert_even(sysv.factor(DKind::Form));
  const int flip = (1 + w.conv.b(ch.p, ch.q)) % 2;

  std::vector<SuperNumber> out(n, SuperNumber(ch.q));
  for (int i = 0; i < n; ++i) {
    SuperNumber acc(ch.q);
    for (int j = 0; j < n; ++j) {
      if (w.comp[j].is_zero() || a.a[j][i].is_zero()) continue;
      SuperNumber t = w.comp[j] * a.a[j][i] * invfac;
      if (flip && ((i >= ch.p) != (j >= ch.p))) t = -t;
      acc = acc + t;
    }
    out[i] = acc;
  }
  return out;
}

// determinant of a small matrix of expressions by first-row expansion
ScalarExpr expr_det(const std::vector<std::vector<ScalarExpr>>& m) {
  const int n = int(m.size());
  if (n == 0) return ScalarExpr(1.0);
  if (n == 1) return m[0][0];
  ScalarExpr acc(0.0);
  for (int c = 0; c < n; ++c) {
    if (m[0][c].is_zero()) continue;
    std::vector<std::vector<ScalarExpr>> minor;
    for (int r = 1; r < n; ++r) {
      std::vector<ScalarExpr> row;
      for (int cc = 0; cc < n; ++cc)
        if (cc != c) row.push_back(m[r][cc]);
      minor.push_back(std::move(row));
    }
    ScalarExpr t = m[0][c] * expr_det(minor);
    acc = (c % 2) ? acc - t : acc + t;
  }
  return acc;
}

double det_numeric(std::vector<double> m, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(m[c * n + k], m[piv * n + k]);
      det = -det;
    }
    double d = m[c * n + c];
    if (d == 0.0) return 0.0;
    det *= d;
    for (int r = c + 1; r < n; ++r) {
      double f = m[r * n + c] / d;
      for (int k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return det;
}

// ascending k-tuples into 0..n-1
std::vector<std::vector<int>> ascending_tuples(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > n) return out;
  std::vector<int> cur;
  std::function<void(int)> rec = [&](int start) {
    if (int(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int v = start; v < n; ++v) {
      cur.push_back(v);
      rec(v + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

void accumulate(std::map<std::vector<int>, ScalarExpr>& comp,
                const std::vector<int>& idx, const ScalarExpr& v) {
  if (v.is_zero()) return;
  auto it = comp.find(idx);
  if (it == comp.end())
    comp.emplace(idx, v);
  else
    it->second = it->second + v;
}

void require_codim1(const Face& face) {
  if (face_codim(face) != 1)
    throw DimensionError("boundary pieces must have codimension one");
}

// the leading slot must be the gamma pullback of its own body
void require_gamma_led(const Chart& chart, const Retraction& gamma,
                       const Face& face, const std::vector<Env>& samples) {
  SuperNumber lead = face.sys.forward[0];
  SuperNumber pull = compose_scalar(lead.body(), chart.evars, gamma.images);
  SuperNumber diff = pull - lead;
  for (const Env& env : samples)
    for (const auto& [mask, v] : eval_sn(diff, env))
      if (std::abs(v) > 1e-7)
        throw InvalidCorner(
            "face must be led by the gamma pullback of its body");
}

double resolve_orient(const Chart& chart, const Face& face, double declared,
                      double base_orient, Rng& rng) {
  if (declared != 0.0) return declared;
  return face_orientation(chart, face, base_orient, rng);
}

}  // namespace

IntegralForm make_integral_form(const Chart& chart,
                                std::vector<SuperNumber> comp,
                                Convention conv) {
  const int n = chart.p + chart.q;
  if (int(comp.size()) != n)
    throw DimensionError("an integral form needs one component per frame "
                         "direction");
  int parity = -1;
  for (int i = 0; i < n; ++i) {
    if (comp[i].q() != chart.q)
      throw DimensionError("component over the wrong generator count");
    if (comp[i].is_zero()) continue;
    Parity par = comp[i].parity();
    if (par == Parity::Mixed)
      throw ParityError("integral form components must be homogeneous");
    int tag = ((par == Parity::Odd ? 1 : 0) + (i >= chart.p ? 1 : 0)) % 2;
    if (parity == -1)
      parity = tag;
    else if (parity != tag)
      throw ParityError("integral form components disagree in parity");
  }
  return IntegralForm{chart, std::move(comp), parity == -1 ? 0 : parity, conv};
}

std::vector<SuperNumber> form_to_frame(const IntegralForm& w,
                                       const SystemView& sysv) {
  std::vector<SuperNumber> out = frame_components_std(w, sysv);
  for (SuperNumber& c : out) c = sysv.fn_to_system(c);
  return out;
}

IntegralForm form_from_frame(const Chart& chart, const SystemView& sysv,
                             const std::vector<SuperNumber>& comp_slots,
                             int parity, Convention conv) {
  const int n = chart.p + chart.q;
  if (int(comp_slots.size()) != n)
    throw DimensionError("an integral form needs one component per frame "
                         "direction");
  std::vector<SuperNumber> images = sysv.sys().forward;
  for (int j = 0; j < chart.q; ++j) images.push_back(chart.odd_sn(j));
  SuperMatrix k = mat_inverse(system_matrix(chart, images));
  const SuperNumber& fac = sysv.factor(DKind::Form);
  const int flip = (1 + conv.b(chart.p, chart.q)) % 2;

  std::vector<SuperNumber> out(n, SuperNumber(chart.q));
  bool any = false;
  for (int j = 0; j < n; ++j) {
    SuperNumber acc(chart.q);
    for (int i = 0; i < n; ++i) {
      if (comp_slots[i].is_zero() || k.a[i][j].is_zero()) continue;
      SuperNumber t = sysv.fn_to_std(comp_slots[i]) * k.a[i][j] * fac;
      if (flip && ((i >= chart.p) != (j >= chart.p))) t = -t;
      acc = acc + t;
    }
    if (!acc.is_zero()) any = true;
    out[j] = acc;
  }
  IntegralForm w = make_integral_form(chart, std::move(out), conv);
  if (!any) w.parity = parity;
  return w;
}

BerezinDensity cartan_d(const IntegralForm& w) {
  const Chart& ch = w.chart;
  const int b = w.conv.b(ch.p, ch.q) % 2;
  const int even_sign = (w.parity + b) % 2;
  SuperNumber acc(ch.q);
  for (int i = 0; i < ch.p + ch.q; ++i) {
    if (w.comp[i].is_zero()) continue;
    SuperNumber d = (i < ch.p) ? sderiv_even(w.comp[i], ch.evars[i])
                               : sderiv_odd(w.comp[i], i - ch.p);
    if (i < ch.p && even_sign) d = -d;
    acc = acc + d;
  }
  return BerezinDensity{ch, DKind::Form, acc, w.conv};
}

ClassicalForm exterior_d(const ClassicalForm& w) {
  ClassicalForm out{w.vars, w.degree + 1, {}};
  const int n = int(w.vars.size());
  for (const auto& [idx, f] : w.comp) {
    for (int a = 0; a < n; ++a) {
      if (std::find(idx.begin(), idx.end(), a) != idx.end()) continue;
      ScalarExpr d = f.diff(w.vars[a]);
      if (d.is_zero()) continue;
      std::vector<int> nidx = idx;
      int pos = int(std::lower_bound(nidx.begin(), nidx.end(), a) -
                    nidx.begin());
      nidx.insert(nidx.begin() + pos, a);
      accumulate(out.comp, nidx, (pos % 2) ? -d : d);
    }
  }
  return out;
}

ClassicalForm pullback_form(const ClassicalForm& w,
                            const std::vector<std::string>& params,
                            const std::vector<ScalarExpr>& images) {
  if (images.size() != w.vars.size())
    throw DimensionError("one image per form variable");
  std::map<std::string, ScalarExpr> repl;
  for (size_t v = 0; v < w.vars.size(); ++v) repl.emplace(w.vars[v], images[v]);

  auto tuples = ascending_tuples(int(params.size()), w.degree);
  ClassicalForm out{params, w.degree, {}};
  for (const auto& [idx, f] : w.comp) {
    ScalarExpr fs = f.subst(repl);
    if (fs.is_zero()) continue;
    for (const auto& J : tuples) {
      std::vector<std::vector<ScalarExpr>> minor(
          w.degree, std::vector<ScalarExpr>(w.degree, ScalarExpr(0.0)));
      for (int r = 0; r < w.degree; ++r)
        for (int c = 0; c < w.degree; ++c)
          minor[r][c] = images[idx[r]].diff(params[J[c]]);
      ScalarExpr d = expr_det(minor);
      if (!d.is_zero()) accumulate(out.comp, J, fs * d);
    }
  }
  return out;
}

double integrate_form(const ClassicalForm& w, const Region& region,
                      const Quadrature& quad) {
  if (w.degree != int(w.vars.size()))
    throw DimensionError("only top-degree forms integrate over a region");
  if (region.dim() != w.degree)
    throw DimensionError("form degree must match the region dimension");
  std::vector<int> top(w.degree);
  std::iota(top.begin(), top.end(), 0);
  auto it = w.comp.find(top);
  if (it == w.comp.end()) return 0.0;
  return quad.integrate(it->second, region);
}

BerezinDensity pullback_integral_form(const IntegralForm& w, const Face& face,
                                      const std::vector<Env>& ambient_samples) {
  require_codim1(face);
  const Chart& ch = w.chart;
  try {
    SystemView sv(ch, face.sys, ambient_samples);
    std::vector<SuperNumber> comps = form_to_frame(w, sv);
    SuperNumber lead = zero_slot(comps[0], face.sys.slots[0]);
    if (w.conv.b(ch.p, ch.q) % 2) lead = -lead;
    return BerezinDensity{face_chart(ch, face), DKind::Form, lead, w.conv};
  } catch (const NoAdaptedCoordinates&) {
    throw;
  } catch (const Error& e) {
    throw NoAdaptedCoordinates(std::string("face system rejected: ") +
                               e.what());
  }
}

ClassicalForm fibre_integral_form(const IntegralForm& w,
                                  const Retraction& gamma,
                                  const std::vector<Env>& samples) {
  const Chart& ch = w.chart;
  if (ch.p == 0) throw DimensionError("fibre integration needs a base");
  SystemViewPtr gv = view_for_retraction(ch, gamma, samples);
  std::vector<SuperNumber> comps = frame_components_std(w, *gv);

  const uint32_t top = ch.q ? (uint32_t(1) << ch.q) - 1 : 0;
  const int ssgn = w.conv.s(ch.p, ch.q) % 2;
  const int b0 = w.conv.b(ch.p, 0) % 2;

  ClassicalForm out{ch.evars, ch.p - 1, {}};
  for (int i = 0; i < ch.p; ++i) {
    if (comps[i].is_zero()) continue;
    auto coeffs = decompose(ch, comps[i], gamma);
    auto it = coeffs.find(top);
    if (it == coeffs.end() || it->second.is_zero()) continue;
    ScalarExpr g = it->second;
    if ((ssgn + b0 + i) % 2) g = -g;
    std::vector<int> idx;
    for (int a = 0; a < ch.p; ++a)
      if (a != i) idx.push_back(a);
    accumulate(out.comp, idx, g);
  }
  return out;
}

double face_orientation(const Chart& chart, const Face& face,
                        double base_orient, Rng& rng) {
  require_codim1(face);
  if (int(face.sys.inverse.size()) != chart.p)
    throw DimensionError("face system inverse must cover the base");

  std::vector<Env> envs = on_face_samples(chart, face, rng, 8);
  if (envs.empty()) envs.push_back({});
  const std::string& lead = face.sys.slots[0];

  int sign = 0;
  for (Env env : envs) {
    env[lead] = 0.0;
    std::vector<double> jac(chart.p * chart.p, 0.0);
    for (int a = 0; a < chart.p; ++a)
      for (int b = 0; b < chart.p; ++b)
        jac[a * chart.p + b] =
            face.sys.inverse[a].diff(face.sys.slots[b]).eval(env);
    double det = det_numeric(std::move(jac), chart.p);
    if (std::abs(det) < 1e-12)
      throw SignAmbiguous("face parametrization is degenerate");
    int s = det > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (sign != s)
      throw SignAmbiguous("face parametrization changes orientation");
  }
  return -double(sign) * base_orient;
}

StokesReport verify_stokes(const IntegralForm& w, const Retraction& gamma,
                           const std::vector<OrientedFace>& faces,
                           double base_orient, const Quadrature& quad,
                           Rng& rng) {
  const Chart& ch = w.chart;
  StokesReport rep;
  rep.bulk = integrate_berezin(cartan_d(w), gamma, quad);
  const int expo =
      w.conv.s(ch.p, ch.q) + w.conv.s(ch.p - 1, ch.q) + ch.q;
  rep.sign = (expo % 2) ? -1.0 : 1.0;

  std::vector<Env> base = region_samples(ch, quad, rng);
  for (const OrientedFace& of : faces) {
    require_codim1(of.face);
    require_gamma_led(ch, gamma, of.face, base);
    std::vector<Env> ambient = near_face_samples(ch, of.face, rng);
    BerezinDensity pb = pullback_integral_form(w, of.face, ambient);
    Retraction gh = induced_retraction(ch, gamma, of.face, ambient);
    double orient = resolve_orient(ch, of.face, of.orient, base_orient, rng);
    rep.face_vals.push_back(orient * integrate_berezin(pb, gh, quad));
  }
  for (double v : rep.face_vals) rep.boundary += v;
  rep.residual = rep.bulk - rep.sign * rep.boundary;
  return rep;
}

StokesGeneralReport stokes_general(const IntegralForm& w,
                                   const Retraction& gamma_prime,
                                   const std::vector<GeneralBoundary>& pieces,
                                   double base_orient, const Quadrature& quad,
                                   Rng& rng) {
  const Chart& ch = w.chart;
  BerezinDensity om = cartan_d(w);
  StokesGeneralReport rep;
  rep.lhs = integrate_berezin(om, gamma_prime, quad);
  const int expo = w.conv.s(ch.p, ch.q) + w.conv.s(ch.p - 1, ch.q);
  rep.sign = (expo % 2) ? -1.0 : 1.0;
  const int jmax = ch.q / 2;

  double iota_sum = 0.0, corr_sum = 0.0;
  for (const GeneralBoundary& piece : pieces) {
    const Face& face = piece.face;
    require_codim1(face);
    const SuperNumber& tau = face.sys.forward[0];
    std::vector<Env> ambient = near_face_samples(ch, face, rng);

    // the derivation only enters the second and later corrections
    if (jmax >= 2) {
      validate_op(piece.D);
      for (const auto& [j, a] : piece.D.terms)
        if (midx_order(j) != 1)
          throw NotDerivation("boundary derivations must be first order");
      SuperNumber dtau = apply_op(piece.D, tau);
      for (const Env& env : ambient)
        for (const auto& [mask, v] : eval_sn(dtau, env)) {
          double want = (mask == 0) ? 1.0 : 0.0;
          if (std::abs(v - want) > 1e-6)
            throw InvalidCorner(
                "derivation must send the vanishing superfunction to one "
                "near the face");
        }
    }

    double orient = resolve_orient(ch, face, piece.orient, base_orient, rng);
    BerezinDensity pb = pullback_integral_form(w, face, ambient);
    double iv = orient * integrate_berezin(pb, canonical_retraction(pb.chart),
                                           quad);
    rep.iota.push_back(iv);
    iota_sum += iv;

    SuperNumber delta =
        compose_scalar(tau.body(), ch.evars, gamma_prime.images) - tau;
    std::vector<double> corr;
    for (int j = 1; j <= jmax; ++j) {
      SuperNumber mult = ScalarExpr(1.0 / factorial(j)) * pow_sn(delta, j);
      double val = 0.0;
      if (!mult.is_zero()) {
        BerezinDensity wj = times_function(om, mult);
        for (int it = 0; it + 1 < j; ++it) wj = act(wj, piece.D);
        BerezinDensity rest = restrict_density(wj, face, ambient);
        val = orient *
              integrate_berezin(rest, canonical_retraction(rest.chart), quad);
      }
      corr.push_back(val);
      corr_sum += val;
    }
    rep.corrections.push_back(std::move(corr));
  }

  const double qsgn = (ch.q % 2) ? -1.0 : 1.0;
  rep.rhs = rep.sign * (qsgn * iota_sum - corr_sum);
  rep.residual = rep.lhs - rep.rhs;
  return rep;
}

}  // namespace berez
