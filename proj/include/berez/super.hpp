// Grassmann algebra on q anticommuting generators with symbolic scalar
// coefficients, keyed by generator bitmask.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "berez/scalar.hpp"

namespace berez {

enum class Parity { Even, Odd, Mixed };

inline int mask_grade(uint32_t m) { return __builtin_popcount(m); }

// sign of xi^a * xi^b for disjoint masks, factors written in ascending order
int merge_sign(uint32_t a, uint32_t b);

class SuperNumber {
 public:
  explicit SuperNumber(int q) : q_(q) {}
  SuperNumber(int q, const ScalarExpr& scalar);

  int q() const { return q_; }
  const std::map<uint32_t, ScalarExpr>& terms() const { return terms_; }
  // drops structural zeros
  void set(uint32_t mask, const ScalarExpr& c);
  ScalarExpr coeff(uint32_t mask) const;  // zero if absent

  bool is_zero() const { return terms_.empty(); }
  Parity parity() const;

  ScalarExpr body() const { return coeff(0); }
  SuperNumber soul() const;
  SuperNumber grade_part(int parity_bit) const;

  std::string str(const std::vector<std::string>& odd_names = {}) const;

 private:
  int q_;
  std::map<uint32_t, ScalarExpr> terms_;
};

SuperNumber operator+(const SuperNumber& x, const SuperNumber& y);
SuperNumber operator-(const SuperNumber& x, const SuperNumber& y);
SuperNumber operator*(const SuperNumber& x, const SuperNumber& y);
SuperNumber operator-(const SuperNumber& x);
SuperNumber operator*(const ScalarExpr& c, const SuperNumber& x);

SuperNumber pow_sn(const SuperNumber& x, int n);

// multiplicative inverse; requires even parity and a structural body
SuperNumber invert_even(const SuperNumber& x);

// Taylor substitution of even arguments into a scalar function of the
// formal variables; exact because souls are nilpotent
SuperNumber compose_scalar(const ScalarExpr& g,
                           const std::vector<std::string>& formal_vars,
                           const std::vector<SuperNumber>& args);

// derivative along a standard even coordinate (by name) or odd generator
SuperNumber sderiv_even(const SuperNumber& f, const std::string& var);
SuperNumber sderiv_odd(const SuperNumber& f, int j);

std::map<uint32_t, double> eval_sn(const SuperNumber& f, const Env& env);

bool sn_numerically_equal(const SuperNumber& x, const SuperNumber& y,
                          const std::vector<std::string>& vars,
                          const std::vector<std::array<double, 2>>& box,
                          Rng& rng, int n = 20, double tol = 1e-10);

// multi-index helpers shared by Taylor expansions and derivation powers
using MIdx = std::vector<int>;
double factorial(int n);
double midx_factorial(const MIdx& a);
int midx_order(const MIdx& a);
std::vector<MIdx> multi_indices(int nvars, int cap);  // all |a| <= cap

}  // namespace berez
