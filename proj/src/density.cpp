#include "berez/density.hpp"

#include <algorithm>

#include "berez/errors.hpp"

namespace berez {

// ---------------------------------------------------------------------------
// Convention

int Convention::s(int p, int q) const {
  switch (smode) {
    case SMode::Default: return p * q + q * (q - 1) / 2;
    case SMode::PqOnly: return p * q;
    case SMode::HalfQ: return q * (q - 1) / 2;
  }
  return 0;
}

int Convention::b(int p, int q) const {
  return bmode == BMode::PPlusQ ? p + q : 0;
}

Convention Convention::parse(const std::string& name) {
  Convention c;
  if (name == "default") c.smode = SMode::Default;
  else if (name == "pq-only") c.smode = SMode::PqOnly;
  else if (name == "half-q") c.smode = SMode::HalfQ;
  else throw ScenarioError("unknown convention name: " + name);
  return c;
}

std::string Convention::str() const {
  std::string s = smode == SMode::Default  ? "s=default"
                  : smode == SMode::PqOnly ? "s=pq-only"
                                           : "s=half-q";
  s += bmode == BMode::PPlusQ ? ", b=p+q" : ", b=0";
  return s;
}

// ---------------------------------------------------------------------------
// Scalar matrix helpers (cofactor determinant, adjugate inverse)

namespace {

using EMat = std::vector<std::vector<ScalarExpr>>;
using SMat = std::vector<std::vector<SuperNumber>>;

EMat minor_mat(const EMat& m, int row, int col) {
  int n = int(m.size());
  EMat out;
  out.reserve(n - 1);
  for (int i = 0; i < n; ++i) {
    if (i == row) continue;
    std::vector<ScalarExpr> r;
    r.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != col) r.push_back(m[i][j]);
    out.push_back(std::move(r));
  }
  return out;
}

ScalarExpr scalar_det(const EMat& m) {
  int n = int(m.size());
  if (n == 0) return ScalarExpr(1.0);
  if (n == 1) return m[0][0];
  ScalarExpr acc;
  for (int j = 0; j < n; ++j) {
    if (m[0][j].is_zero()) continue;
    ScalarExpr term = m[0][j] * scalar_det(minor_mat(m, 0, j));
    acc = j % 2 ? acc - term : acc + term;
  }
  return acc;
}

constexpr int kDetCap = 6;  // adjugate route; larger blocks are out of scope

// inverse via adjugate over the cofactor determinant
EMat scalar_inverse(const EMat& m) {
  int n = int(m.size());
  if (n > kDetCap)
    throw DimensionError("matrix inverse limited to size " +
                         std::to_string(kDetCap));
  ScalarExpr det = scalar_det(m);
  if (det.is_zero()) throw DomainError("structurally singular body matrix");
  EMat out(n, std::vector<ScalarExpr>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ScalarExpr c = scalar_det(minor_mat(m, j, i));
      if ((i + j) % 2) c = -c;
      out[i][j] = c / det;
    }
  return out;
}

SMat smat_from_scalars(const EMat& m, int qgen) {
  SMat out;
  out.reserve(m.size());
  for (const auto& row : m) {
    std::vector<SuperNumber> r;
    r.reserve(row.size());
    for (const auto& e : row) r.emplace_back(qgen, e);
    out.push_back(std::move(r));
  }
  return out;
}

SMat smat_mul(const SMat& x, const SMat& y, int qgen) {
  int n = int(x.size()), k = int(y.size()), m2 = k ? int(y[0].size()) : 0;
  SMat out(n, std::vector<SuperNumber>(m2, SuperNumber(qgen)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m2; ++j) {
      SuperNumber acc(qgen);
      for (int t = 0; t < k; ++t) acc = acc + x[i][t] * y[t][j];
      out[i][j] = acc;
    }
  return out;
}

SMat smat_soul(const SMat& m) {
  SMat out = m;
  for (auto& row : out)
    for (auto& e : row) e = e.soul();
  return out;
}

// Neumann inverse given the inverted body: sum_k (-Binv * soul)^k * Binv,
// truncated by the nilpotency bound `steps`
SMat neumann_inverse(const SMat& m, const SMat& binv, int qgen, int steps) {
  SMat soul = smat_soul(m);
  SMat c = smat_mul(binv, soul, qgen);
  SMat acc = binv, cur = binv;
  for (int k = 1; k <= steps; ++k) {
    cur = smat_mul(c, cur, qgen);
    bool all_zero = true;
    for (auto& row : cur)
      for (auto& e : row) {
        e = -e;
        all_zero = all_zero && e.is_zero();
      }
    if (all_zero) break;
    for (size_t i = 0; i < acc.size(); ++i)
      for (size_t j = 0; j < acc[i].size(); ++j) acc[i][j] = acc[i][j] + cur[i][j];
  }
  return acc;
}

EMat body_of(const SMat& m) {
  EMat out;
  out.reserve(m.size());
  for (const auto& row : m) {
    std::vector<ScalarExpr> r;
    r.reserve(row.size());
    for (const auto& e : row) r.push_back(e.body());
    out.push_back(std::move(r));
  }
  return out;
}

// inverse of a square matrix of even elements
SMat even_mat_inv(const SMat& m, int qgen) {
  SMat binv = smat_from_scalars(scalar_inverse(body_of(m)), qgen);
  return neumann_inverse(m, binv, qgen, qgen / 2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Supermatrices

SuperMatrix identity_matrix(int pdim, int qdim, int qgen) {
  SuperMatrix m{pdim, qdim, qgen, {}};
  m.a.assign(m.n(), std::vector<SuperNumber>(m.n(), SuperNumber(qgen)));
  for (int i = 0; i < m.n(); ++i) m.a[i][i] = SuperNumber(qgen, ScalarExpr(1.0));
  return m;
}

void validate_blocks(const SuperMatrix& m) {
  if (int(m.a.size()) != m.n()) throw DimensionError("supermatrix shape");
  for (int i = 0; i < m.n(); ++i) {
    if (int(m.a[i].size()) != m.n()) throw DimensionError("supermatrix shape");
    for (int j = 0; j < m.n(); ++j) {
      const SuperNumber& e = m.a[i][j];
      if (e.is_zero()) continue;
      bool want_odd = m.row_odd(i) != (j >= m.pdim);
      Parity p = e.parity();
      if (p == Parity::Mixed || (p == Parity::Odd) != want_odd)
        throw ParityError("supermatrix entry has wrong parity at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
}

SuperMatrix mat_mul(const SuperMatrix& x, const SuperMatrix& y) {
  if (x.pdim != y.pdim || x.qdim != y.qdim || x.qgen != y.qgen)
    throw DimensionError("supermatrix product shape mismatch");
  SuperMatrix out{x.pdim, x.qdim, x.qgen, smat_mul(x.a, y.a, x.qgen)};
  return out;
}

SuperMatrix mat_inverse(const SuperMatrix& m) {
  validate_blocks(m);
  // blockwise body inverse: the body is block diagonal since odd entries
  // have no grade-zero part
  EMat rb(m.pdim, std::vector<ScalarExpr>(m.pdim));
  EMat vb(m.qdim, std::vector<ScalarExpr>(m.qdim));
  for (int i = 0; i < m.pdim; ++i)
    for (int j = 0; j < m.pdim; ++j) rb[i][j] = m.a[i][j].body();
  for (int i = 0; i < m.qdim; ++i)
    for (int j = 0; j < m.qdim; ++j)
      vb[i][j] = m.a[m.pdim + i][m.pdim + j].body();
  EMat rbi = scalar_inverse(rb), vbi = scalar_inverse(vb);
  SMat binv(m.n(), std::vector<SuperNumber>(m.n(), SuperNumber(m.qgen)));
  for (int i = 0; i < m.pdim; ++i)
    for (int j = 0; j < m.pdim; ++j) binv[i][j] = SuperNumber(m.qgen, rbi[i][j]);
  for (int i = 0; i < m.qdim; ++i)
    for (int j = 0; j < m.qdim; ++j)
      binv[m.pdim + i][m.pdim + j] = SuperNumber(m.qgen, vbi[i][j]);
  return SuperMatrix{m.pdim, m.qdim, m.qgen,
                     neumann_inverse(m.a, binv, m.qgen, m.qgen)};
}

SuperNumber even_det(const SMat& m, int qgen) {
  int n = int(m.size());
  if (n == 0) return SuperNumber(qgen, ScalarExpr(1.0));
  if (n > kDetCap)
    throw DimensionError("even determinant limited to size " +
                         std::to_string(kDetCap));
  for (const auto& row : m)
    for (const auto& e : row)
      if (!e.is_zero() && e.parity() != Parity::Even)
        throw ParityError("even determinant needs even entries");
  EMat bodies = body_of(m);
  ScalarExpr det_b = scalar_det(bodies);
  if (det_b.is_zero())
    throw DomainError("even determinant: structurally singular body");
  // det(A) = det(body) * exp(tr log(1 + body^{-1} soul)), both series
  // truncated by nilpotency of the soul
  SMat binv = smat_from_scalars(scalar_inverse(bodies), qgen);
  SMat nmat = smat_mul(binv, smat_soul(m), qgen);
  int cap = qgen / 2;
  SuperNumber logsum(qgen);
  SMat power = nmat;
  for (int k = 1; k <= cap; ++k) {
    SuperNumber tr(qgen);
    for (int i = 0; i < n; ++i) tr = tr + power[i][i];
    SuperNumber term = ScalarExpr((k % 2 ? 1.0 : -1.0) / k) * tr;
    logsum = logsum + term;
    if (k < cap) power = smat_mul(power, nmat, qgen);
  }
  SuperNumber corr(qgen, ScalarExpr(1.0));
  SuperNumber pw(qgen, ScalarExpr(1.0));
  for (int k = 1; k <= cap; ++k) {
    pw = pw * logsum;
    if (pw.is_zero()) break;
    corr = corr + ScalarExpr(1.0 / factorial(k)) * pw;
  }
  return SuperNumber(qgen, det_b) * corr;
}

SuperNumber ber(const SuperMatrix& m) {
  validate_blocks(m);
  if (m.qdim == 0) return even_det(m.a, m.qgen);
  SMat v(m.qdim, std::vector<SuperNumber>(m.qdim, SuperNumber(m.qgen)));
  for (int i = 0; i < m.qdim; ++i)
    for (int j = 0; j < m.qdim; ++j) v[i][j] = m.a[m.pdim + i][m.pdim + j];
  if (scalar_det(body_of(v)).is_zero())
    throw SingularV("lower-right block has a structurally singular body");
  SuperNumber dv = even_det(v, m.qgen);
  if (m.pdim == 0) return invert_even(dv);
  SMat vinv = even_mat_inv(v, m.qgen);
  // X = R - S V^{-1} T
  SMat s(m.pdim, std::vector<SuperNumber>(m.qdim, SuperNumber(m.qgen)));
  SMat t(m.qdim, std::vector<SuperNumber>(m.pdim, SuperNumber(m.qgen)));
  for (int i = 0; i < m.pdim; ++i)
    for (int j = 0; j < m.qdim; ++j) s[i][j] = m.a[i][m.pdim + j];
  for (int i = 0; i < m.qdim; ++i)
    for (int j = 0; j < m.pdim; ++j) t[i][j] = m.a[m.pdim + i][j];
  SMat svt = smat_mul(smat_mul(s, vinv, m.qgen), t, m.qgen);
  SMat x(m.pdim, std::vector<SuperNumber>(m.pdim, SuperNumber(m.qgen)));
  for (int i = 0; i < m.pdim; ++i)
    for (int j = 0; j < m.pdim; ++j) x[i][j] = m.a[i][j] - svt[i][j];
  return even_det(x, m.qgen) * invert_even(dv);
}

SuperNumber abs_ber(const SuperMatrix& m, const std::vector<Env>& samples) {
  SuperNumber w = ber(m);
  if (samples.empty()) throw SignAmbiguous("no sample points for the sign");
  // the sign comes from the body determinant of the upper-left block,
  // constant on a connected region
  EMat rb(m.pdim, std::vector<ScalarExpr>(m.pdim));
  for (int i = 0; i < m.pdim; ++i)
    for (int j = 0; j < m.pdim; ++j) rb[i][j] = m.a[i][j].body();
  ScalarExpr det_rb = scalar_det(rb);
  int sign = 0;
  for (const Env& env : samples) {
    double v = det_rb.eval(env);
    if (v == 0.0) throw SignAmbiguous("body determinant vanishes at a sample");
    int s = v > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (sign != s)
      throw SignAmbiguous("body determinant changes sign on the region");
  }
  return sign < 0 ? -w : w;
}

SuperMatrix system_matrix(const Chart& chart,
                          const std::vector<SuperNumber>& images) {
  if (int(images.size()) != chart.p + chart.q)
    throw DimensionError("system needs p + q coordinate images");
  SuperMatrix m{chart.p, chart.q, chart.q, {}};
  m.a.assign(m.n(), std::vector<SuperNumber>(m.n(), SuperNumber(chart.q)));
  for (int j = 0; j < m.n(); ++j)
    for (int i = 0; i < m.n(); ++i)
      m.a[i][j] = i < chart.p ? sderiv_even(images[j], chart.evars[i])
                              : sderiv_odd(images[j], i - chart.p);
  validate_blocks(m);
  return m;
}

SuperNumber jacobian_ber(const Chart& chart,
                         const std::vector<SuperNumber>& x_images,
                         const std::vector<SuperNumber>& y_images) {
  SuperMatrix ax = system_matrix(chart, x_images);
  SuperMatrix ay = system_matrix(chart, y_images);
  return ber(mat_mul(mat_inverse(ay), ax));
}

SuperNumber jacobian_abs_ber(const Chart& chart,
                             const std::vector<SuperNumber>& x_images,
                             const std::vector<SuperNumber>& y_images,
                             const std::vector<Env>& samples) {
  SuperMatrix ax = system_matrix(chart, x_images);
  SuperMatrix ay = system_matrix(chart, y_images);
  return abs_ber(mat_mul(mat_inverse(ay), ax), samples);
}

// ---------------------------------------------------------------------------
// Densities and system views

BerezinDensity make_density(const Chart& chart, DKind kind,
                            const SuperNumber& f_std, Convention conv) {
  if (f_std.q() != chart.q) throw DimensionError("coefficient generator count");
  return BerezinDensity{chart, kind, f_std, conv};
}

namespace {

std::vector<SuperNumber> with_odd_identity(const Chart& chart,
                                           std::vector<SuperNumber> evens) {
  for (int j = 0; j < chart.q; ++j) evens.push_back(chart.odd_sn(j));
  return evens;
}

}  // namespace

SystemView::SystemView(const Chart& chart, AdaptedSystem sys,
                       const std::vector<Env>& samples)
    : chart_(chart),
      view_(chart_, std::move(sys), samples),
      samples_(samples),
      factor_signed_(chart.q),
      factor_abs_(chart.q) {
  SuperMatrix a =
      system_matrix(chart_, with_odd_identity(chart_, view_.sys().forward));
  factor_signed_ = ber(a);
  factor_abs_ = abs_ber(a, samples_);
}

const SuperNumber& SystemView::factor(DKind kind) const {
  return kind == DKind::Form ? factor_signed_ : factor_abs_;
}

SuperNumber SystemView::to_std(const SuperNumber& f_sys, DKind kind) const {
  return view_.from_slots(f_sys) * factor(kind);
}

SuperNumber SystemView::to_system(const SuperNumber& f_std, DKind kind) const {
  return view_.to_slots(f_std * invert_even(factor(kind)));
}

SuperNumber SystemView::fn_to_system(const SuperNumber& h_std) const {
  return view_.to_slots(h_std);
}

SuperNumber SystemView::fn_to_std(const SuperNumber& h_sys) const {
  return view_.from_slots(h_sys);
}

SystemViewPtr view_for_retraction(const Chart& chart, const Retraction& gamma,
                                  const std::vector<Env>& samples,
                                  std::string name) {
  return std::make_shared<SystemView>(
      chart, shift_adapted(chart, gamma, std::move(name)), samples);
}

SystemViewPtr view_for_standard(const Chart& chart,
                                const std::vector<Env>& samples) {
  return std::make_shared<SystemView>(chart, identity_adapted(chart), samples);
}

std::vector<Env> region_samples(const Chart& chart, const Quadrature& quad,
                                Rng& rng, int k) {
  return quad.sample_points(chart.region, k, rng);
}

// ---------------------------------------------------------------------------
// Fibre integration

VolumeDensity fibre_integral(const BerezinDensity& w, const Retraction& gamma) {
  const Chart& ch = w.chart;
  SuperMatrix a = system_matrix(ch, with_odd_identity(ch, gamma.images));
  // the factor has unit body, so the signed and absolute factors agree
  SuperNumber g = w.f * invert_even(ber(a));
  auto coeffs = decompose(ch, g, gamma);
  uint32_t top = ch.q ? (uint32_t(1) << ch.q) - 1 : 0;
  ScalarExpr c;
  auto it = coeffs.find(top);
  if (it != coeffs.end()) c = it->second;
  if (w.conv.s(ch.p, ch.q) % 2) c = -c;
  return VolumeDensity{ch.evars, c, ch.region};
}

double integrate_berezin(const BerezinDensity& w, const Retraction& gamma,
                         const Quadrature& quad) {
  VolumeDensity vd = fibre_integral(w, gamma);
  return quad.integrate(vd.g, vd.region);
}

SuperNumber coefficient_along(const BerezinDensity& w, const SystemView& sysv) {
  return sysv.to_system(w.f, w.kind);
}

// ---------------------------------------------------------------------------
// Differential operators

void validate_op(const DiffOp& op) {
  if (!op.sysv) throw DimensionError("operator has no coordinate system");
  const Chart& ch = op.sysv->chart();
  for (const auto& [j, a] : op.terms) {
    if (int(j.size()) != ch.p + ch.q)
      throw DimensionError("operator index length must be p + q");
    for (int i = 0; i < int(j.size()); ++i) {
      if (j[i] < 0) throw DimensionError("negative derivative order");
      if (i >= ch.p && j[i] > 1)
        throw DimensionError("odd derivative order above one vanishes");
    }
    if (a.q() != ch.q) throw DimensionError("coefficient generator count");
  }
}

namespace {

// moves the coefficient across the volume element: no-op for even b
SuperNumber flip_by_b(const SuperNumber& x, const Convention& conv, int p,
                      int q) {
  if (conv.b(p, q) % 2 == 0) return x;
  return x.grade_part(0) - x.grade_part(1);
}

int odd_order(const MIdx& j, int p) {
  int r = 0;
  for (size_t i = p; i < j.size(); ++i) r += j[i];
  return r;
}

}  // namespace

BerezinDensity act(const BerezinDensity& w, const DiffOp& op) {
  validate_op(op);
  const SystemView& sv = *op.sysv;
  const Chart& ch = w.chart;
  if (ch.p != sv.chart().p || ch.q != sv.chart().q ||
      ch.evars != sv.chart().evars)
    throw DimensionError("operator chart does not match the density chart");
  SuperNumber fr = flip_by_b(sv.to_system(w.f, w.kind), w.conv, ch.p, ch.q);
  SuperNumber total(ch.q);
  for (const auto& [j, aj] : op.terms) {
    SuperNumber h = fr * aj;
    if (h.is_zero()) continue;
    // iterated first-order adjoints; derivatives apply first coordinate
    // first, which absorbs the reordering sign of the odd partials
    int jodd = odd_order(j, ch.p);
    int expo = midx_order(j);
    if (jodd) {
      Parity ph = h.parity();
      if (ph == Parity::Mixed)
        throw ParityError("odd derivative needs a parity-homogeneous factor");
      if (ph == Parity::Odd) expo += jodd;
    }
    SuperNumber d = sv.slots().derive_multi_slot(h, j);
    total = expo % 2 ? total - d : total + d;
  }
  SuperNumber gl = flip_by_b(total, w.conv, ch.p, ch.q);
  return BerezinDensity{ch, w.kind, sv.to_std(gl, w.kind), w.conv};
}

SuperNumber apply_op(const DiffOp& op, const SuperNumber& h_std) {
  validate_op(op);
  const SystemView& sv = *op.sysv;
  SuperNumber hs = sv.fn_to_system(h_std);
  SuperNumber total(hs.q());
  for (const auto& [j, aj] : op.terms)
    total = total + aj * sv.slots().derive_multi_slot(hs, j);
  return sv.fn_to_std(total);
}

BerezinDensity times_function(const BerezinDensity& w,
                              const SuperNumber& h_std) {
  // right module action: h crosses the volume element, picking up
  // (-1)^{|h| b} per homogeneous part
  SuperNumber h = flip_by_b(h_std, w.conv, w.chart.p, w.chart.q);
  return BerezinDensity{w.chart, w.kind, w.f * h, w.conv};
}

BerezinDensity lie_derivative(const BerezinDensity& w, const DiffOp& X) {
  validate_op(X);
  const SystemView& sv = *X.sysv;
  const Chart& ch = w.chart;
  for (const auto& [j, a] : X.terms)
    if (midx_order(j) != 1)
      throw NotDerivation("Lie derivative needs a first-order operator");
  SuperNumber f = sv.to_system(w.f, w.kind);
  SuperNumber total(ch.q);
  for (const auto& [j, g] : X.terms) {
    int i = 0;
    while (j[i] == 0) ++i;
    bool odd_coord = i >= ch.p;
    // sign (-1)^{|g||x_i|} per homogeneous part of g
    SuperNumber t = sv.slots().derive_slot(g.grade_part(0) * f, i);
    SuperNumber u = sv.slots().derive_slot(g.grade_part(1) * f, i);
    total = total + t + (odd_coord ? -u : u);
  }
  return BerezinDensity{ch, w.kind, sv.to_std(total, w.kind), w.conv};
}

DiffOp morphism_as_diffop(const SystemViewPtr& gamma_view,
                          const Retraction& gamma,
                          const Retraction& gamma_prime) {
  const SystemView& sv = *gamma_view;
  const Chart& ch = sv.chart();
  std::vector<SuperNumber> delta;
  for (int k = 0; k < ch.p; ++k) {
    SuperNumber d = gamma_prime.images[k] - gamma.images[k];
    if (!d.body().is_zero())
      throw UnsupportedSystem("retraction images must share their body");
    delta.push_back(sv.fn_to_system(d));
  }
  DiffOp op{gamma_view, {}};
  for (const MIdx& i : multi_indices(ch.p, ch.q / 2)) {
    SuperNumber a(ch.q, ScalarExpr(1.0 / midx_factorial(i)));
    for (int k = 0; k < ch.p; ++k)
      if (i[k]) a = a * pow_sn(delta[k], i[k]);
    if (a.is_zero()) continue;
    MIdx j = i;
    j.resize(ch.p + ch.q, 0);
    op.terms.emplace(std::move(j), std::move(a));
  }
  return op;
}

CovLocal change_of_vars_local(const BerezinDensity& w, const Retraction& gamma,
                              const Retraction& gamma_prime,
                              const std::vector<Env>& samples) {
  SystemViewPtr gv = view_for_retraction(w.chart, gamma, samples);
  DiffOp full = morphism_as_diffop(gv, gamma, gamma_prime);
  CovLocal out{w, {}};
  for (const auto& [j, a] : full.terms) {
    if (midx_order(j) == 0) continue;
    DiffOp single{gv, {{j, a}}};
    MIdx i(j.begin(), j.begin() + w.chart.p);
    out.corrections.push_back(CovTerm{std::move(i), act(w, single)});
  }
  return out;
}

}  // namespace berez
