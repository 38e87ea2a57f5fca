#include "berez/corners.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "berez/errors.hpp"

namespace berez {

namespace {

std::vector<std::string> leading_slots(const Face& face) {
  return {face.sys.slots.begin(), face.sys.slots.begin() + face.S.size()};
}

std::vector<std::string> transverse_slots(const Face& face) {
  return {face.sys.slots.begin() + face.S.size(), face.sys.slots.end()};
}

std::map<std::string, ScalarExpr> zero_repl(const std::vector<std::string>& v) {
  std::map<std::string, ScalarExpr> repl;
  for (const auto& name : v) repl.emplace(name, ScalarExpr(0.0));
  return repl;
}

SuperNumber subst_coeffs(const SuperNumber& g,
                         const std::map<std::string, ScalarExpr>& repl) {
  SuperNumber r(g.q());
  for (const auto& [m, c] : g.terms()) r.set(m, c.subst(repl));
  return r;
}

double det_gauss(std::vector<double> m, int n) {
  double det = 1.0;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(m[r * n + c]) > std::abs(m[piv * n + c])) piv = r;
    if (m[piv * n + c] == 0.0) return 0.0;
    if (piv != c) {
      for (int k = 0; k < n; ++k) std::swap(m[piv * n + k], m[c * n + k]);
      det = -det;
    }
    det *= m[c * n + c];
    for (int r = c + 1; r < n; ++r) {
      double f = m[r * n + c] / m[c * n + c];
      for (int k = c; k < n; ++k) m[r * n + k] -= f * m[c * n + k];
    }
  }
  return det;
}

void check_face_shape(const Chart& chart, const Face& face) {
  const int k = face_codim(face);
  if (k == 0 || k > chart.p)
    throw InvalidCorner("face needs between 1 and p vanishing indices");
  if (int(face.sys.slots.size()) != chart.p)
    throw DimensionError("face system must have p slots");
  if (int(face.box.size()) != chart.p - k)
    throw DimensionError("face box must bound the transverse slots");
}

}  // namespace

int face_codim(const Face& face) { return int(face.S.size()); }

Chart face_chart(const Chart& chart, const Face& face) {
  check_face_shape(chart, face);
  auto tv = transverse_slots(face);
  return make_chart(chart.p - face_codim(face), chart.q, tv,
                    box_region(tv, face.box), chart.onames);
}

std::vector<ScalarExpr> face_param(const Chart& chart, const Face& face) {
  check_face_shape(chart, face);
  auto repl = zero_repl(leading_slots(face));
  std::vector<ScalarExpr> out;
  out.reserve(chart.p);
  for (const auto& e : face.sys.inverse) out.push_back(e.subst(repl));
  return out;
}

std::vector<Env> near_face_samples(const Chart& chart, const Face& face,
                                   Rng& rng, int k) {
  check_face_shape(chart, face);
  const int cod = face_codim(face);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Env> out;
  for (int s = 0; s < k; ++s) {
    Env slot_env;
    for (int r = 0; r < cod; ++r)
      slot_env[face.sys.slots[r]] = face.thick * (0.05 + 0.95 * uni(rng));
    for (int t = 0; t < chart.p - cod; ++t) {
      const auto& b = face.box[t];
      slot_env[face.sys.slots[cod + t]] = b[0] + (b[1] - b[0]) * uni(rng);
    }
    Env env;
    for (int i = 0; i < chart.p; ++i)
      env[chart.evars[i]] = face.sys.inverse[i].eval(slot_env);
    out.push_back(std::move(env));
  }
  return out;
}

std::vector<Env> on_face_samples(const Chart& chart, const Face& face,
                                 Rng& rng, int k) {
  check_face_shape(chart, face);
  const int cod = face_codim(face);
  if (chart.p == cod) return {Env{}};
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Env> out;
  for (int s = 0; s < k; ++s) {
    Env env;
    for (int t = 0; t < chart.p - cod; ++t) {
      const auto& b = face.box[t];
      env[face.sys.slots[cod + t]] = b[0] + (b[1] - b[0]) * uni(rng);
    }
    out.push_back(std::move(env));
  }
  return out;
}

std::vector<IndexPair> enumerate_indices(const Face& face, int n, int q) {
  const int k = face_codim(face);
  const int cap = q / 2;
  std::vector<IndexPair> out;
  if (k > cap) return out;
  MIdx m(k, 0);
  auto emit = [&] {
    IndexPair ip{MIdx(n, 0), MIdx(n, 0)};
    for (int r = 0; r < k; ++r) {
      ip.j[face.S[r]] = m[r];
      ip.jdown[face.S[r]] = m[r] - 1;
    }
    out.push_back(std::move(ip));
  };
  auto rec = [&](auto&& self, int r, int used) -> void {
    if (r == k) {
      emit();
      return;
    }
    // later positions need at least one each
    for (int v = 1; used + v + (k - r - 1) <= cap; ++v) {
      m[r] = v;
      self(self, r + 1, used + v);
    }
  };
  rec(rec, 0, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

void validate_corners(const Chart& chart, const CornerData& cd,
                      const Quadrature& quad, Rng& rng) {
  const int n = int(cd.rho.size());
  const int p = chart.p;
  if (int(cd.tau.size()) != n || int(cd.D.size()) != n ||
      int(cd.dvalid.size()) != n)
    throw DimensionError("corner data: rho, tau, D, dvalid sizes differ");

  auto base_samples = region_samples(chart, quad, rng);
  for (int i = 0; i < n; ++i) {
    if (cd.tau[i].q() != chart.q)
      throw DimensionError("boundary superfunction generator count");
    Parity par = cd.tau[i].parity();
    if (par == Parity::Odd || par == Parity::Mixed)
      throw InvalidCorner("boundary superfunctions must be even");
    ScalarExpr body = cd.tau[i].body();
    for (const Env& env : base_samples) {
      double a = body.eval(env), b = cd.rho[i].eval(env);
      if (std::abs(a - b) > 1e-7 * (1.0 + std::abs(b)))
        throw InvalidCorner(
            "boundary superfunction body disagrees with its function");
    }
  }

  for (const Face& face : cd.faces) {
    check_face_shape(chart, face);
    const int k = face_codim(face);
    for (int r = 0; r < k; ++r) {
      if (face.S[r] < 0 || face.S[r] >= n)
        throw InvalidCorner("face index outside the boundary family");
      if (r && face.S[r] <= face.S[r - 1])
        throw InvalidCorner("face indices must be strictly ascending");
    }
    for (int r = 0; r < k; ++r) {
      SuperNumber diff = face.sys.forward[r] - cd.tau[face.S[r]];
      for (const Env& env : base_samples)
        for (const auto& [mask, v] : eval_sn(diff, env))
          if (std::abs(v) > 1e-7)
            throw InvalidCorner(
                "face system must lead with the vanishing superfunctions");
    }

    auto par = face_param(chart, face);
    for (const Env& fenv : on_face_samples(chart, face, rng, 8)) {
      Env base;
      for (int i = 0; i < p; ++i) base[chart.evars[i]] = par[i].eval(fenv);
      for (int i = 0; i < n; ++i) {
        double v = cd.rho[i].eval(base);
        bool vanishing =
            std::find(face.S.begin(), face.S.end(), i) != face.S.end();
        if (vanishing && std::abs(v) > 1e-7)
          throw InvalidCorner(
              "boundary function does not vanish along the face");
        if (!vanishing && v < 1e-9)
          throw InvalidCorner(
              "boundary function must stay positive along the face");
      }
      // independence: Gram determinant of the normalized gradients
      std::vector<std::vector<double>> grad(k, std::vector<double>(p));
      for (int r = 0; r < k; ++r) {
        double norm = 0.0;
        for (int l = 0; l < p; ++l) {
          grad[r][l] = cd.rho[face.S[r]].diff(chart.evars[l]).eval(base);
          norm += grad[r][l] * grad[r][l];
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12)
          throw InvalidCorner("vanishing family is dependent at a face point");
        for (int l = 0; l < p; ++l) grad[r][l] /= norm;
      }
      std::vector<double> gram(size_t(k) * k);
      for (int r = 0; r < k; ++r)
        for (int s = 0; s < k; ++s) {
          double dot = 0.0;
          for (int l = 0; l < p; ++l) dot += grad[r][l] * grad[s][l];
          gram[r * k + s] = dot;
        }
      if (std::abs(det_gauss(std::move(gram), k)) < 1e-6)
        throw InvalidCorner("vanishing family is dependent at a face point");
    }
  }

  const Region& reg = chart.region;
  const int d = reg.dim();
  for (int i = 0; i < n; ++i) {
    validate_op(cd.D[i]);
    for (const auto& [j, a] : cd.D[i].terms)
      if (midx_order(j) != 1)
        throw NotDerivation("boundary derivations must be first order");
    if (int(cd.dvalid[i].size()) != d)
      throw DimensionError("validity box must match the region parameters");
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      std::vector<std::array<double, 2>> cut(d);
      bool empty = false;
      for (int a = 0; a < d; ++a) {
        cut[a][0] = std::max({cd.dvalid[i][a][0], cd.dvalid[j][a][0],
                              reg.box[a][0]});
        cut[a][1] = std::min({cd.dvalid[i][a][1], cd.dvalid[j][a][1],
                              reg.box[a][1]});
        if (!(cut[a][0] < cut[a][1])) empty = true;
      }
      if (empty) continue;
      SuperNumber dij = apply_op(cd.D[i], cd.tau[j]);
      for (int s = 0; s < 8; ++s) {
        Env env;
        for (int a = 0; a < d; ++a)
          env[reg.params[a]] =
              cut[a][0] + (cut[a][1] - cut[a][0]) * uni(rng);
        if (!reg.map.empty())
          for (int t = 0; t < d; ++t)
            env[reg.target_vars[t]] = reg.map[t].eval(env);
        for (const auto& [mask, v] : eval_sn(dij, env)) {
          double want = (mask == 0 && i == j) ? 1.0 : 0.0;
          if (std::abs(v - want) > 1e-6)
            throw InvalidCorner(
                "boundary derivations fail the delta condition");
        }
      }
    }
}

// ---------------------------------------------------------------------------
// Restriction and the induced retraction

namespace {

BerezinDensity restrict_with(const SystemView& sv, const Chart& chart,
                             const Face& face, const BerezinDensity& w) {
  SuperNumber c = sv.to_system(w.f, w.kind);
  c = subst_coeffs(c, zero_repl(leading_slots(face)));
  return BerezinDensity{face_chart(chart, face), w.kind, c, w.conv};
}

}  // namespace

BerezinDensity restrict_density(const BerezinDensity& w, const Face& face,
                                const std::vector<Env>& ambient_samples) {
  check_face_shape(w.chart, face);
  try {
    SystemView sv(w.chart, face.sys, ambient_samples);
    return restrict_with(sv, w.chart, face, w);
  } catch (const NoAdaptedCoordinates&) {
    throw;
  } catch (const Error& e) {
    throw NoAdaptedCoordinates(std::string("face system rejected: ") +
                               e.what());
  }
}

Retraction induced_retraction(const Chart& chart, const Retraction& gamma,
                              const Face& face,
                              const std::vector<Env>& ambient_samples) {
  check_face_shape(chart, face);
  try {
    SystemView sv(chart, face.sys, ambient_samples);
    auto repl = zero_repl(leading_slots(face));
    Rng snap_rng(0x9e3779b97f4a7c15ull);
    auto fenvs = on_face_samples(chart, face, snap_rng, 8);
    Retraction out;
    for (int pos = face_codim(face); pos < chart.p; ++pos) {
      SuperNumber pulled = compose_scalar(face.sys.forward[pos].body(),
                                          chart.evars, gamma.images);
      SuperNumber sl = subst_coeffs(sv.slots().to_slots(pulled), repl);
      out.images.push_back(snap_body_to(
          sl, ScalarExpr::var(face.sys.slots[pos]), fenvs, 1e-7));
    }
    return out;
  } catch (const NoAdaptedCoordinates&) {
    throw;
  } catch (const Error& e) {
    throw NoAdaptedCoordinates(std::string("face system rejected: ") +
                               e.what());
  }
}

// ---------------------------------------------------------------------------
// Boundary decomposition

double BoundaryDecomposition::boundary() const {
  double t = 0.0;
  for (const auto& c : terms) t += c.value;
  return t;
}

double BoundaryDecomposition::boundary_base() const {
  double t = 0.0;
  for (const auto& c : terms) t += c.value_base;
  return t;
}

namespace {

// base density and boundary function magnitudes near uncovered parts of the
// region boundary; periodic map seams are detected and skipped
void decay_check(const VolumeDensity& vd, const CornerData& cd,
                 std::vector<std::string>& warnings) {
  const Region& r = vd.region;
  const int d = r.dim();
  if (d == 0) return;
  if (r.mask) {
    warnings.push_back("decay check skipped: region uses a mask");
    return;
  }
  CompiledExpr g(vd.g, vd.vars);
  std::vector<CompiledExpr> rho;
  rho.reserve(cd.rho.size());
  for (const auto& e : cd.rho) rho.emplace_back(e, vd.vars);
  std::vector<CompiledExpr> maps;
  if (!r.map.empty())
    for (const auto& e : r.map) maps.emplace_back(e, r.params);

  auto at = [&](const std::vector<double>& par) {
    if (maps.empty()) return par;
    std::vector<double> pt(maps.size());
    for (size_t t = 0; t < maps.size(); ++t) pt[t] = maps[t].eval(par.data());
    return pt;
  };

  // interior scale from a few fixed fractions
  double scale = 0.0;
  for (double f : {0.5, 0.3, 0.7}) {
    std::vector<double> par(d);
    for (int a = 0; a < d; ++a)
      par[a] = r.box[a][0] + f * (r.box[a][1] - r.box[a][0]);
    scale = std::max(scale, std::abs(g.eval(at(par).data())));
  }

  const double fracs[] = {0.2, 0.5, 0.8};
  for (int axis = 0; axis < d; ++axis) {
    // facet probe grid over the other axes
    std::vector<std::vector<double>> grid{{}};
    for (int a = 0; a < d; ++a) {
      if (a == axis) {
        for (auto& row : grid) row.push_back(0.0);
        continue;
      }
      std::vector<std::vector<double>> next;
      for (const auto& row : grid)
        for (double f : fracs) {
          auto e = row;
          e.push_back(r.box[a][0] + f * (r.box[a][1] - r.box[a][0]));
          next.push_back(std::move(e));
        }
      grid = std::move(next);
    }
    if (!maps.empty()) {
      // seam: both sides of the axis map to the same points
      bool seam = true;
      for (auto row : grid) {
        row[axis] = r.box[axis][0];
        auto lo = at(row);
        row[axis] = r.box[axis][1];
        auto hi = at(row);
        for (size_t t = 0; t < lo.size(); ++t)
          if (std::abs(lo[t] - hi[t]) > 1e-9) seam = false;
      }
      if (seam) continue;
    }
    for (int side = 0; side < 2; ++side) {
      double wdt = r.box[axis][1] - r.box[axis][0];
      double val = side ? r.box[axis][1] - 1e-6 * wdt
                        : r.box[axis][0] + 1e-6 * wdt;
      bool covered = false;
      for (size_t m = 0; m < rho.size() && !covered; ++m) {
        bool vanishes = true;
        for (auto row : grid) {
          row[axis] = val;
          if (std::abs(rho[m].eval(at(row).data())) > 1e-5) vanishes = false;
        }
        covered = vanishes;
      }
      if (covered) continue;
      double gmax = 0.0;
      for (auto row : grid) {
        row[axis] = val;
        gmax = std::max(gmax, std::abs(g.eval(at(row).data())));
      }
      if (gmax > 1e-6 * (1.0 + scale)) {
        std::ostringstream os;
        os << "density does not vanish near the region boundary at "
           << r.params[axis] << " = " << (side ? r.box[axis][1] : r.box[axis][0])
           << " (max |g| = " << gmax << ")";
        warnings.push_back(os.str());
      }
    }
  }
}

Face body_face(const Face& face) {
  Face b = face;
  b.sys.name += "0";
  for (auto& img : b.sys.forward) img = SuperNumber(0, img.body());
  return b;
}

// classical reduction: even first-order terms with body coefficients
DiffOp body_op(const DiffOp& op, const Chart& bch,
               const std::vector<Env>& samples) {
  const AdaptedSystem& sys = op.sysv->sys();
  AdaptedSystem bsys{sys.name + "0", sys.slots, {}, sys.inverse};
  for (const auto& img : sys.forward)
    bsys.forward.push_back(SuperNumber(0, img.body()));
  auto view = std::make_shared<SystemView>(bch, std::move(bsys), samples);
  DiffOp out{view, {}};
  for (const auto& [j, a] : op.terms) {
    MIdx jb(j.begin(), j.begin() + bch.p);
    if (midx_order(jb) != 1) continue;
    SuperNumber ab(0, a.body());
    if (!ab.is_zero()) out.terms.emplace(std::move(jb), std::move(ab));
  }
  return out;
}

}  // namespace

BoundaryDecomposition change_of_vars_corners(const BerezinDensity& w,
                                             const Retraction& gamma,
                                             const Retraction& gamma_prime,
                                             const CornerData& cd,
                                             const Quadrature& quad,
                                             Rng& rng) {
  const Chart& ch = w.chart;
  const int p = ch.p, q = ch.q, n = int(cd.rho.size());
  validate_corners(ch, cd, quad, rng);

  auto samples = region_samples(ch, quad, rng);
  std::vector<SuperNumber> delta;
  for (int i = 0; i < n; ++i) {
    SuperNumber pull = compose_scalar(cd.rho[i], ch.evars, gamma.images);
    SuperNumber diff = pull - cd.tau[i];
    for (const Env& env : samples)
      for (const auto& [mask, v] : eval_sn(diff, env))
        if (std::abs(v) > 1e-7)
          throw InvalidCorner(
              "corner data must carry the gamma pullbacks of the boundary "
              "functions");
    delta.push_back(compose_scalar(cd.rho[i], ch.evars, gamma_prime.images) -
                    pull);
  }

  BoundaryDecomposition out;
  out.bulk = integrate_berezin(w, gamma, quad);
  decay_check(fibre_integral(w, gamma), cd, out.warnings);

  Chart bch = make_chart(p, 0, ch.evars, ch.region);
  std::vector<DiffOp> bD;
  bD.reserve(n);
  for (int i = 0; i < n; ++i) bD.push_back(body_op(cd.D[i], bch, samples));

  for (int fi = 0; fi < int(cd.faces.size()); ++fi) {
    const Face& face = cd.faces[fi];
    auto indices = enumerate_indices(face, n, q);
    if (indices.empty()) continue;
    auto ambient = near_face_samples(ch, face, rng);
    auto make_view = [](const Chart& c, const AdaptedSystem& sys,
                        const std::vector<Env>& smp) {
      try {
        return std::make_shared<SystemView>(c, sys, smp);
      } catch (const Error& e) {
        throw NoAdaptedCoordinates(std::string("face system rejected: ") +
                                   e.what());
      }
    };
    auto fsvp = make_view(ch, face.sys, ambient);
    const SystemView& fsv = *fsvp;
    Retraction gh = induced_retraction(ch, gamma, face, ambient);
    Face bface = body_face(face);
    auto bsvp = make_view(bch, bface.sys, ambient);
    const SystemView& bsv = *bsvp;
    const int sgn_expo =
        w.conv.s(p, q) + w.conv.s(p - face_codim(face), q);
    const double sgn = sgn_expo % 2 ? -1.0 : 1.0;

    for (const auto& [j, jdown] : indices) {
      CornerTerm term{fi, j, jdown, 0.0, 0.0};
      SuperNumber mult(q, ScalarExpr(1.0 / midx_factorial(j)));
      for (int i = 0; i < n; ++i)
        if (j[i]) mult = mult * pow_sn(delta[i], j[i]);
      if (!mult.is_zero()) {
        BerezinDensity wj = times_function(w, mult);
        BerezinDensity acted = wj;
        for (int i : face.S)
          for (int rep = 0; rep < jdown[i]; ++rep) acted = act(acted, cd.D[i]);
        BerezinDensity rest = restrict_with(fsv, ch, face, acted);
        term.value = sgn * integrate_berezin(rest, gh, quad);

        VolumeDensity vj = fibre_integral(wj, gamma);
        BerezinDensity w0{bch, w.kind, SuperNumber(0, vj.g), w.conv};
        for (int i : face.S)
          for (int rep = 0; rep < jdown[i]; ++rep) w0 = act(w0, bD[i]);
        BerezinDensity rest0 = restrict_with(bsv, bch, bface, w0);
        term.value_base =
            integrate_berezin(rest0, canonical_retraction(rest0.chart), quad);
      }
      out.terms.push_back(std::move(term));
    }
  }
  return out;
}

}  // namespace berez
