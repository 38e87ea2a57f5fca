// Acceptance suite: seven checks, one pass/fail line each, exit 0 only when
// every check passes.  Tolerances are the contract; do not loosen them.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "berez/builtins.hpp"
#include "berez/corners.hpp"
#include "berez/errors.hpp"
#include "berez/scenario.hpp"
#include "berez/stokes.hpp"

using namespace berez;

namespace {

const double kPi = 3.14159265358979323846;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Checker {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
  void close(double a, double b, double tol, const std::string& what) {
    expect(std::abs(a - b) <= tol,
           what + ": |" + fmt(a) + " - " + fmt(b) + "| > " + fmt(tol));
  }
  void small(double a, double tol, const std::string& what) {
    expect(std::abs(a) <= tol, what + ": |" + fmt(a) + "| > " + fmt(tol));
  }
};

Chart chart12() {
  return make_chart(1, 2, {"u"}, box_region({"u"}, {{0.0, 1.0}}));
}

Chart chart24() {
  return make_chart(2, 4, {"u1", "u2"},
                    box_region({"u1", "u2"}, {{0.0, 1.0}, {0.0, 1.0}}));
}

Retraction random_retraction(const Chart& ch, Rng& rng) {
  std::uniform_real_distribution<double> uni(-0.3, 0.3);
  Retraction r;
  for (int i = 0; i < ch.p; ++i) {
    SuperNumber g = ch.evar_sn(i);
    for (uint32_t mask = 0; mask < (1u << ch.q); ++mask) {
      if (mask == 0 || mask_grade(mask) % 2) continue;
      ScalarExpr c(uni(rng));
      for (int k = 0; k < ch.p; ++k)
        c = c + ScalarExpr(uni(rng)) * ScalarExpr::var(ch.evars[k]);
      SuperNumber t(ch.q);
      t.set(mask, c);
      g = g + t;
    }
    r.images.push_back(g);
  }
  return r;
}

SuperNumber random_fn(const Chart& ch, Rng& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SuperNumber f(ch.q);
  for (uint32_t mask = 0; mask < (1u << ch.q); ++mask) {
    ScalarExpr c(uni(rng));
    for (int k = 0; k < ch.p; ++k)
      c = c + ScalarExpr(uni(rng)) * ScalarExpr::var(ch.evars[k]);
    f.set(mask, c);
  }
  return f;
}

SuperMatrix random_matrix(int pdim, int qdim, int qgen, Rng& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SuperMatrix m{pdim, qdim, qgen, {}};
  m.a.assign(m.n(), std::vector<SuperNumber>(m.n(), SuperNumber(qgen)));
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j) {
      bool odd_entry = (i >= pdim) != (j >= pdim);
      SuperNumber e(qgen);
      for (uint32_t mask = 0; mask < (1u << qgen); ++mask) {
        if ((mask_grade(mask) % 2 != 0) != odd_entry) continue;
        double c = uni(rng);
        if (mask == 0 && i == j) c += 3.0;
        e.set(mask, ScalarExpr(c));
      }
      m.a[i][j] = e;
    }
  return m;
}

DiffOp slot_derivation(const SystemViewPtr& view, int slot) {
  const Chart& ch = view->chart();
  MIdx j(ch.p + ch.q, 0);
  j[slot] = 1;
  return DiffOp{view, {{j, SuperNumber(ch.q, ScalarExpr(1.0))}}};
}

RunOutcome run_builtin(const std::string& name) {
  const BuiltinExample* ex = find_example(name);
  if (!ex) throw ScenarioError("missing builtin " + name);
  return run_scenario(parse_scenario_text(ex->text), {});
}

// five-point central difference
double numdiff(const ScalarExpr& e, const Env& base, const std::string& var) {
  double h = 1e-3;
  double x = base.at(var);
  auto at = [&](double v) {
    Env env = base;
    env[var] = v;
    return e.eval(env);
  };
  return (-at(x + 2 * h) + 8 * at(x + h) - 8 * at(x - h) + at(x - 2 * h)) /
         (12 * h);
}

// ---------------------------------------------------------------------------
// 1. Interval with a soul-shifted retraction: the two integrals and the
//    correction term that reconciles them.

bool crit_interval_shift(Checker& c) {
  Chart ch = chart12();
  Retraction gx = canonical_retraction(ch);
  Retraction gy{{ch.evar_sn(0) + ch.odd_sn(0) * ch.odd_sn(1)}};
  BerezinDensity w = make_density(
      ch, DKind::Density, ch.evar_sn(0) + ch.odd_sn(0) * ch.odd_sn(1));
  Quadrature quad(32);
  double ix = integrate_berezin(w, gx, quad);
  double iy = integrate_berezin(w, gy, quad);
  double expected_x = Convention{}.s_sign(1, 2) * 1.0;
  c.close(ix, expected_x, 1e-12, "first retraction integral");
  c.small(iy, 1e-12, "second retraction integral");

  Rng rng(29);
  auto samples = region_samples(ch, quad, rng);
  CovLocal cov = change_of_vars_local(w, gx, gy, samples);
  double corr = 0.0;
  for (const auto& t : cov.corrections)
    corr += integrate_berezin(t.term, gx, quad);
  c.close(corr, iy - ix, 1e-12, "correction vs integral difference");
  return c.ok;
}

// ---------------------------------------------------------------------------
// 2. Endpoint formula on the interval for five distinct densities: the
//    integral difference equals the body increment with the fibre sign.

bool crit_endpoint_formula(Checker& c) {
  Chart ch = chart12();
  Retraction gx = canonical_retraction(ch);
  Retraction gy{{ch.evar_sn(0) + ch.odd_sn(0) * ch.odd_sn(1)}};
  Quadrature quad(32);
  ScalarExpr u = ScalarExpr::var("u");
  double sgn = -Convention{}.s_sign(1, 2);  // -(-1)^{s(1,2)}

  std::vector<std::pair<ScalarExpr, ScalarExpr>> cases = {
      {sin_e(u), exp_e(u)},
      {u * u * u - u + ScalarExpr(2.0), u * u},
      {exp_e(u), ScalarExpr(0.0)},
      {ScalarExpr(1.0) / (ScalarExpr(1.0) + u * u), sin_e(u)},
      {sqrt_e(u + ScalarExpr(1.0)), cos_e(u)},
  };
  int k = 0;
  for (const auto& [f0, ctop] : cases) {
    ++k;
    SuperNumber top(2);
    top.set(0b11, ScalarExpr(1.0));
    SuperNumber f = ch.scalar(f0) + ch.scalar(ctop) * top;
    BerezinDensity w = make_density(ch, DKind::Density, f);
    double lhs = integrate_berezin(w, gy, quad) - integrate_berezin(w, gx, quad);
    double rhs = sgn * (f0.eval({{"u", 1.0}}) - f0.eval({{"u", 0.0}}));
    c.close(lhs, rhs, 1e-10, "density " + std::to_string(k));
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// 3. Annulus: the cartesian integral splits into polar bulk plus an inner
//    boundary term whose limit is the full-circle value.

bool crit_annulus_limit(Checker& c) {
  RunOutcome out = run_builtin("polar");
  c.expect(out.instances.size() == 3, "three shrinking instances expected");
  for (size_t i = 0; i < out.instances.size(); ++i)
    c.small(out.instances[i].cov.at(0).residual, 1e-6,
            "identity residual, instance " + std::to_string(i));
  c.expect(out.limit.has_value(), "extrapolation outcome expected");
  if (out.limit) {
    double target = -Convention{}.s_sign(2, 2) * 2.0 * kPi;  // body at 0 is 1
    c.close(out.limit->extrapolated, target, 1e-4, "extrapolated boundary");
  }
  return c.ok;
}

// ---------------------------------------------------------------------------
// 4. Quarter window: the five-term boundary decomposition agrees with the
//    directly computed integral.

bool crit_quadrant_terms(Checker& c) {
  RunOutcome out = run_builtin("quadrant-q4");
  const CovOutcome& cov = out.instances.at(0).cov.at(0);
  c.expect(cov.terms.size() == 5,
           "expected 5 boundary terms, got " +
               std::to_string(cov.terms.size()));
  c.small(cov.residual, 1e-8, "decomposition vs direct integral");
  c.expect(cov.warnings.empty(), "unexpected decay warnings");
  return c.ok;
}

// ---------------------------------------------------------------------------
// 5. Unit square with four odd generators: exactly thirteen structurally
//    nonzero summands, and they reproduce the direct integral.

bool crit_square_count(Checker& c) {
  RunOutcome out = run_builtin("square-q4");
  c.expect(out.summands == 13,
           "expected 13 summands, got " + std::to_string(out.summands));
  c.small(out.instances.at(0).cov.at(0).residual, 1e-8,
          "decomposition vs direct integral");
  return c.ok;
}

// ---------------------------------------------------------------------------
// 6. Ray boundary identities: the adapted face closes the identity at zero,
//    the naive face shows the unit discrepancy, and its transversal term
//    cancels against the corrections; the default sign factor is +1.

bool crit_boundary_identities(Checker& c) {
  RunOutcome out = run_builtin("r14-stokes");
  const StokesOutcome& cor = out.instances.at(0).stokes.at(0);
  const StokesOutcome& nav = out.instances.at(0).stokes.at(1);

  c.close(cor.sign, 1.0, 0.0, "adapted-face sign factor");
  c.small(cor.lhs, 1e-10, "adapted-face bulk side");
  c.small(cor.rhs, 1e-10, "adapted-face boundary side");

  c.close(nav.sign, 1.0, 0.0, "naive-face sign factor");
  c.expect(nav.face_vals.size() == 1 && nav.corrections.size() == 1,
           "one naive boundary piece expected");
  double iota = nav.face_vals.at(0);
  c.close(std::abs(iota), 1.0, 1e-8, "naive transversal term is a unit");
  double csum = 0.0;
  for (double v : nav.corrections.at(0)) csum += v;
  int q = 4;
  double flip = (q % 2 == 0) ? 1.0 : -1.0;
  c.small(flip * iota - csum, 1e-8,
          "transversal term cancels against the corrections");
  c.small(nav.residual, 1e-8, "naive identity residual");
  return c.ok;
}

// ---------------------------------------------------------------------------
// 7. Property batch.

bool prop_ber_multiplicative(Checker& c) {
  Rng rng(7001);
  std::uniform_int_distribution<int> dim(1, 2), gens(0, 3);
  for (int it = 0; it < 100 && c.ok; ++it) {
    int pdim = dim(rng), qdim = dim(rng), qgen = gens(rng);
    SuperMatrix x = random_matrix(pdim, qdim, qgen, rng);
    SuperMatrix y = random_matrix(pdim, qdim, qgen, rng);
    SuperNumber lhs = ber(mat_mul(x, y));
    SuperNumber rhs = ber(x) * ber(y);
    for (uint32_t mask = 0; mask < (1u << qgen); ++mask) {
      double a = lhs.coeff(mask).eval({});
      double b = rhs.coeff(mask).eval({});
      c.expect(std::abs(a - b) <=
                   1e-9 * std::max({1.0, std::abs(a), std::abs(b)}),
               "multiplicativity, pair " + std::to_string(it));
    }
  }
  return c.ok;
}

bool prop_operator_expansion(Checker& c) {
  Chart ch = chart24();
  Quadrature quad(8);
  Rng rng(7013);
  auto samples = region_samples(ch, quad, rng);
  for (int it = 0; it < 5 && c.ok; ++it) {
    Retraction ga = random_retraction(ch, rng);
    Retraction gb = random_retraction(ch, rng);
    BerezinDensity w = make_density(ch, DKind::Density, random_fn(ch, rng));
    SystemViewPtr gav = view_for_retraction(ch, ga, samples);
    BerezinDensity acted = act(w, morphism_as_diffop(gav, ga, gb));
    // the coefficient of the acted density in the first system, reread in
    // the second system, recovers the original coefficientwise
    SystemView gbv(ch, shift_adapted(ch, gb, "b"), samples);
    SuperNumber back =
        gbv.to_std(gav->to_system(acted.f, DKind::Density), DKind::Density);
    for (const Env& env : samples) {
      auto va = eval_sn(back, env), vb = eval_sn(w.f, env);
      for (uint32_t mask = 0; mask < (1u << ch.q); ++mask) {
        double a = va.count(mask) ? va[mask] : 0.0;
        double b = vb.count(mask) ? vb[mask] : 0.0;
        c.expect(std::abs(a - b) <=
                     1e-9 * std::max({1.0, std::abs(a), std::abs(b)}),
                 "operator expansion, iteration " + std::to_string(it));
      }
    }
  }
  return c.ok;
}

bool prop_integration_by_parts(Checker& c) {
  Chart ch = chart12();
  Quadrature quad(64);
  Rng rng(7019);
  auto samples = region_samples(ch, quad, rng);
  SystemViewPtr xv = view_for_standard(ch, samples);
  Retraction gx = canonical_retraction(ch);

  ScalarExpr cut =
      bump(ScalarExpr(2.0) * ScalarExpr::var("u") - ScalarExpr(1.0));
  SuperNumber f = ch.scalar(cut) * random_fn(ch, rng);
  SuperNumber a = ch.scalar(ScalarExpr(0.4) + ScalarExpr::var("u"));
  SuperNumber codd(2);
  codd.set(0b01, ScalarExpr(0.8));
  std::vector<DiffOp> ops = {
      DiffOp{xv, {{MIdx{1, 0, 0}, a}}},
      DiffOp{xv, {{MIdx{0, 1, 0}, a}}},
      DiffOp{xv, {{MIdx{1, 0, 0}, codd}}},
      DiffOp{xv, {{MIdx{1, 1, 1}, a}}},
  };
  std::vector<SuperNumber> hs = {ch.scalar(cos_e(ScalarExpr::var("u"))),
                                 ch.odd_sn(1) * ch.scalar(ScalarExpr(0.9)),
                                 random_fn(ch, rng)};
  int k = 0;
  for (const DiffOp& op : ops) {
    bool needs_homog = false;
    for (const auto& [j, coeff] : op.terms)
      if (j[1] + j[2] > 0) needs_homog = true;
    for (const SuperNumber& h : hs) {
      ++k;
      SuperNumber fh = needs_homog ? f.grade_part(0) : f;
      BerezinDensity w = make_density(ch, DKind::Density, fh);
      double lhs = integrate_berezin(times_function(act(w, op), h), gx, quad);
      double rhs =
          integrate_berezin(times_function(w, apply_op(op, h)), gx, quad);
      c.expect(std::abs(lhs - rhs) <=
                   1e-8 * std::max({1.0, std::abs(lhs), std::abs(rhs)}),
               "adjoint pairing, case " + std::to_string(k));
    }
  }
  return c.ok;
}

bool prop_retraction_independence(Checker& c) {
  Chart ch = chart24();
  Quadrature quad(48);
  Rng rng(7027);
  ScalarExpr u1 = ScalarExpr::var("u1"), u2 = ScalarExpr::var("u2");
  // polynomial cutoff vanishing to fourth order on the whole boundary
  ScalarExpr cut = pow_i(u1 * (ScalarExpr(1.0) - u1), 4) *
                   pow_i(u2 * (ScalarExpr(1.0) - u2), 4);
  for (int it = 0; it < 10 && c.ok; ++it) {
    Retraction ga = random_retraction(ch, rng);
    Retraction gb = random_retraction(ch, rng);
    BerezinDensity w =
        make_density(ch, DKind::Density, ch.scalar(cut) * random_fn(ch, rng));
    double ia = integrate_berezin(w, ga, quad);
    double ib = integrate_berezin(w, gb, quad);
    c.expect(std::abs(ia - ib) <= 1e-8,
             "pair " + std::to_string(it) + ": " + fmt(ia) + " vs " + fmt(ib));
  }
  return c.ok;
}

bool prop_restriction_compatibility(Checker& c) {
  Chart ch = chart24();
  Rng rng(7039);
  Retraction g = random_retraction(ch, rng);
  BerezinDensity w = make_density(ch, DKind::Density, random_fn(ch, rng));

  Face face;
  face.S = {0};
  face.sys = AdaptedSystem{"sh",
                           {"s1", "s2"},
                           {g.images[0], g.images[1]},
                           {ScalarExpr::var("s1"), ScalarExpr::var("s2")}};
  face.box = {{0.0, 1.0}};
  auto amb = near_face_samples(ch, face, rng);

  VolumeDensity on_face =
      fibre_integral(restrict_density(w, face, amb),
                     induced_retraction(ch, g, face, amb));
  VolumeDensity on_base = fibre_integral(w, g);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    double t = uni(rng);
    double lhs = on_face.g.eval({{"s2", t}});
    double rhs = on_base.g.eval({{"u1", 0.0}, {"u2", t}});
    c.expect(std::abs(lhs - rhs) <=
                 1e-10 * std::max({1.0, std::abs(lhs), std::abs(rhs)}),
             "face point " + std::to_string(k));
  }
  return c.ok;
}

bool prop_symbolic_derivatives(Checker& c) {
  ScalarExpr u = ScalarExpr::var("u"), v = ScalarExpr::var("v");
  std::vector<ScalarExpr> exprs = {
      sin_e(ScalarExpr(2.0) * u) * exp_e(u * v),
      log_e(ScalarExpr(1.0) + u * u) * cos_e(v),
      pow_r(u + ScalarExpr(1.0), 3, 2) * v,
      (u + v) / (ScalarExpr(2.0) + u * v),
      bump(ScalarExpr(0.5) * u) * (ScalarExpr(1.0) + v),
      atan2_e(v + ScalarExpr(2.0), u + ScalarExpr(2.0)),
  };
  Rng rng(7043);
  std::uniform_real_distribution<double> uni(0.1, 0.9);
  int k = 0;
  for (const ScalarExpr& e : exprs) {
    ++k;
    for (const std::string& var : {std::string("u"), std::string("v")}) {
      ScalarExpr de = e.diff(var);
      for (int pt = 0; pt < 8; ++pt) {
        Env env{{"u", uni(rng)}, {"v", uni(rng)}};
        double a = de.eval(env), b = numdiff(e, env, var);
        c.expect(std::abs(a - b) <=
                     1e-6 * std::max({1.0, std::abs(a), std::abs(b)}),
                 "expression " + std::to_string(k) + " d/d" + var);
      }
    }
  }
  return c.ok;
}

bool prop_derivation_family_independence(Checker& c) {
  Chart ch = chart24();
  Rng rng(91);
  Quadrature quad(96);
  auto samples = region_samples(ch, quad, rng);

  ScalarExpr u1 = ScalarExpr::var("u1"), u2 = ScalarExpr::var("u2");
  ScalarExpr cut = bump(u1) * bump(ScalarExpr(2.0) * u2 - ScalarExpr(1.0));
  BerezinDensity w =
      make_density(ch, DKind::Density, ch.scalar(cut) * random_fn(ch, rng));
  Retraction gp = random_retraction(ch, rng);

  CornerData cd;
  cd.rho = {u1};
  cd.tau = {ch.evar_sn(0)};
  Face face;
  face.S = {0};
  face.sys = AdaptedSystem{"fa",
                           {"fa0", "fa1"},
                           {ch.evar_sn(0), ch.evar_sn(1)},
                           {ScalarExpr::var("fa0"), ScalarExpr::var("fa1")}};
  face.box = {{0.0, 1.0}};
  cd.faces.push_back(face);
  cd.dvalid = {ch.region.box};

  cd.D = {slot_derivation(view_for_standard(ch, samples), 0)};
  auto a = change_of_vars_corners(w, canonical_retraction(ch), gp, cd, quad,
                                  rng);

  AdaptedSystem sh;
  sh.name = "shear";
  sh.slots = {"t", "w2"};
  sh.forward = {ch.evar_sn(0),
                ch.scalar(u2 * (ScalarExpr(1.0) + ScalarExpr(0.3) * u1))};
  sh.inverse = {ScalarExpr::var("t"),
                ScalarExpr::var("w2") /
                    (ScalarExpr(1.0) + ScalarExpr(0.3) * ScalarExpr::var("t"))};
  cd.D = {slot_derivation(std::make_shared<SystemView>(ch, sh, samples), 0)};
  auto b = change_of_vars_corners(w, canonical_retraction(ch), gp, cd, quad,
                                  rng);

  double direct = integrate_berezin(w, gp, quad);
  c.small(a.boundary() - b.boundary(), 1e-8, "boundary sums differ");
  c.small(a.total() - direct, 1e-8, "first family misses the direct value");
  c.small(b.total() - direct, 1e-8, "second family misses the direct value");
  return c.ok;
}

bool crit_property_batch(Checker& c) {
  auto t0 = std::chrono::steady_clock::now();
  struct Prop {
    const char* name;
    bool (*fn)(Checker&);
  };
  const Prop props[] = {
      {"berezinian multiplicativity", prop_ber_multiplicative},
      {"operator expansion round trip", prop_operator_expansion},
      {"integration by parts", prop_integration_by_parts},
      {"retraction independence", prop_retraction_independence},
      {"restriction compatibility", prop_restriction_compatibility},
      {"symbolic derivatives", prop_symbolic_derivatives},
      {"derivation family independence", prop_derivation_family_independence},
  };
  for (const Prop& p : props) {
    Checker sub;
    bool ok = false;
    try {
      ok = p.fn(sub);
    } catch (const std::exception& e) {
      sub.detail = std::string("exception: ") + e.what();
    }
    c.expect(ok, std::string(p.name) +
                     (sub.detail.empty() ? "" : " [" + sub.detail + "]"));
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  c.expect(secs < 300.0, "batch exceeded 5 minutes (" + fmt(secs) + "s)");
  return c.ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*fn)(Checker&);
  };
  const Criterion criteria[] = {
      {"interval shift: integrals and correction term", crit_interval_shift},
      {"endpoint formula for five densities", crit_endpoint_formula},
      {"annulus boundary term and its limit", crit_annulus_limit},
      {"quarter window five-term decomposition", crit_quadrant_terms},
      {"unit square thirteen-summand count", crit_square_count},
      {"ray boundary identities and sign factors", crit_boundary_identities},
      {"property batch", crit_property_batch},
  };

  int failures = 0;
  for (const Criterion& crit : criteria) {
    Checker c;
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string err;
    try {
      ok = crit.fn(c);
    } catch (const std::exception& e) {
      err = std::string("exception: ") + e.what();
      ok = false;
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    if (secs >= 60.0) {
      ok = false;
      if (!err.empty()) err += "; ";
      err += "exceeded the 60s budget";
    }
    std::string detail = c.detail;
    if (!err.empty()) detail += (detail.empty() ? "" : "; ") + err;
    std::printf("[%s] %s (%.2fs)%s%s%s\n", ok ? "PASS" : "FAIL", crit.name,
                secs, detail.empty() ? "" : " -- ", detail.c_str(), "");
    if (!ok) ++failures;
  }
  int total = int(sizeof(criteria) / sizeof(criteria[0]));
  std::printf("acceptance: %d/%d criteria passed\n", total - failures, total);
  return failures == 0 ? 0 : 1;
}
