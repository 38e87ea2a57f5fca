#include "berez/super.hpp"

#include "berez/errors.hpp"

namespace berez {

int merge_sign(uint32_t a, uint32_t b) {
  int s = 0;
  for (uint32_t bb = b, j = 0; bb; bb >>= 1, ++j)
    if (bb & 1) s += __builtin_popcount(a >> (j + 1));
  return (s & 1) ? -1 : 1;
}

SuperNumber::SuperNumber(int q, const ScalarExpr& scalar) : q_(q) {
  set(0, scalar);
}

void SuperNumber::set(uint32_t mask, const ScalarExpr& c) {
  if (c.is_zero())
    terms_.erase(mask);
  else
    terms_[mask] = c;
}

ScalarExpr SuperNumber::coeff(uint32_t mask) const {
  auto it = terms_.find(mask);
  return it == terms_.end() ? ScalarExpr() : it->second;
}

Parity SuperNumber::parity() const {
  bool even = false, odd = false;
  for (const auto& [m, c] : terms_) (mask_grade(m) & 1 ? odd : even) = true;
  if (odd && even) return Parity::Mixed;
  return odd ? Parity::Odd : Parity::Even;
}

SuperNumber SuperNumber::soul() const {
  SuperNumber r(q_);
  for (const auto& [m, c] : terms_)
    if (m != 0) r.terms_.emplace(m, c);
  return r;
}

SuperNumber SuperNumber::grade_part(int parity_bit) const {
  SuperNumber r(q_);
  for (const auto& [m, c] : terms_)
    if ((mask_grade(m) & 1) == parity_bit) r.terms_.emplace(m, c);
  return r;
}

std::string SuperNumber::str(const std::vector<std::string>& odd_names) const {
  if (terms_.empty()) return "0";
  std::string out;
  for (const auto& [m, c] : terms_) {
    if (!out.empty()) out += " + ";
    out += c.str();
    for (int j = 0; j < q_; ++j)
      if (m & (1u << j)) {
        out += '*';
        out += size_t(j) < odd_names.size() ? odd_names[j]
                                            : "x" + std::to_string(j + 1);
      }
  }
  return out;
}

SuperNumber operator+(const SuperNumber& x, const SuperNumber& y) {
  SuperNumber r = x;
  for (const auto& [m, c] : y.terms()) r.set(m, r.coeff(m) + c);
  return r;
}

SuperNumber operator-(const SuperNumber& x, const SuperNumber& y) {
  SuperNumber r = x;
  for (const auto& [m, c] : y.terms()) r.set(m, r.coeff(m) - c);
  return r;
}

SuperNumber operator*(const SuperNumber& x, const SuperNumber& y) {
  SuperNumber r(x.q());
  for (const auto& [ma, ca] : x.terms())
    for (const auto& [mb, cb] : y.terms()) {
      if (ma & mb) continue;
      ScalarExpr t = ca * cb;
      if (merge_sign(ma, mb) < 0) t = -t;
      r.set(ma | mb, r.coeff(ma | mb) + t);
    }
  return r;
}

SuperNumber operator-(const SuperNumber& x) {
  SuperNumber r(x.q());
  for (const auto& [m, c] : x.terms()) r.set(m, -c);
  return r;
}

SuperNumber operator*(const ScalarExpr& c, const SuperNumber& x) {
  SuperNumber r(x.q());
  for (const auto& [m, cc] : x.terms()) r.set(m, c * cc);
  return r;
}

SuperNumber pow_sn(const SuperNumber& x, int n) {
  SuperNumber r(x.q(), ScalarExpr(1.0));
  for (int i = 0; i < n; ++i) r = r * x;
  return r;
}

SuperNumber invert_even(const SuperNumber& x) {
  if (x.parity() != Parity::Even)
    throw ParityError("invert_even: operand is not even");
  ScalarExpr b = x.body();
  if (b.is_zero()) throw DomainError("invert_even: zero body");
  SuperNumber soul = x.soul();
  SuperNumber r(x.q());
  SuperNumber p(x.q(), ScalarExpr(1.0));
  ScalarExpr binv = ScalarExpr(1.0) / b;
  ScalarExpr bpow = binv;
  for (int k = 0; k <= x.q() / 2; ++k) {
    ScalarExpr c = (k & 1) ? -bpow : bpow;
    r = r + c * p;
    p = p * soul;
    bpow = bpow * binv;
  }
  return r;
}

double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double midx_factorial(const MIdx& a) {
  double r = 1.0;
  for (int k : a) r *= factorial(k);
  return r;
}

int midx_order(const MIdx& a) {
  int s = 0;
  for (int k : a) s += k;
  return s;
}

std::vector<MIdx> multi_indices(int nvars, int cap) {
  std::vector<MIdx> out;
  MIdx cur(nvars, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == nvars) {
      out.push_back(cur);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      cur[pos] = k;
      self(self, pos + 1, left - k);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, cap);
  return out;
}

SuperNumber compose_scalar(const ScalarExpr& g,
                           const std::vector<std::string>& formal_vars,
                           const std::vector<SuperNumber>& args) {
  if (formal_vars.size() != args.size())
    throw DimensionError("compose_scalar: arity mismatch");
  int q = args.empty() ? 0 : args[0].q();
  for (const auto& a : args)
    if (a.parity() != Parity::Even)
      throw ParityError("compose_scalar: argument is not even");
  std::map<std::string, ScalarExpr> bodies;
  std::vector<SuperNumber> souls;
  for (size_t i = 0; i < args.size(); ++i) {
    bodies[formal_vars[i]] = args[i].body();
    souls.push_back(args[i].soul());
  }
  SuperNumber out(q);
  for (const MIdx& alpha : multi_indices(int(args.size()), q / 2)) {
    ScalarExpr d = g;
    for (size_t i = 0; i < args.size(); ++i)
      for (int k = 0; k < alpha[i]; ++k) d = d.diff(formal_vars[i]);
    if (d.is_zero()) continue;
    d = d.subst(bodies);
    if (d.is_zero()) continue;
    SuperNumber term(q, d / ScalarExpr(midx_factorial(alpha)));
    for (size_t i = 0; i < args.size(); ++i)
      if (alpha[i] > 0) term = term * pow_sn(souls[i], alpha[i]);
    out = out + term;
  }
  return out;
}

SuperNumber sderiv_even(const SuperNumber& f, const std::string& var) {
  SuperNumber r(f.q());
  for (const auto& [m, c] : f.terms()) r.set(m, c.diff(var));
  return r;
}

SuperNumber sderiv_odd(const SuperNumber& f, int j) {
  SuperNumber r(f.q());
  for (const auto& [m, c] : f.terms()) {
    if (!(m & (1u << j))) continue;
    // sign counts generators standing left of xi_j
    int below = __builtin_popcount(m & ((1u << j) - 1));
    r.set(m & ~(1u << j), (below & 1) ? -c : c);
  }
  return r;
}

std::map<uint32_t, double> eval_sn(const SuperNumber& f, const Env& env) {
  std::map<uint32_t, double> out;
  for (const auto& [m, c] : f.terms()) out[m] = c.eval(env);
  return out;
}

bool sn_numerically_equal(const SuperNumber& x, const SuperNumber& y,
                          const std::vector<std::string>& vars,
                          const std::vector<std::array<double, 2>>& box,
                          Rng& rng, int n, double tol) {
  if (x.q() != y.q()) return false;
  std::map<uint32_t, char> masks;
  for (const auto& [m, c] : x.terms()) masks[m] = 1;
  for (const auto& [m, c] : y.terms()) masks[m] = 1;
  for (const auto& [m, u] : masks)
    if (!numerically_equal(x.coeff(m), y.coeff(m), vars, box, rng, n, tol))
      return false;
  return true;
}

}  // namespace berez
