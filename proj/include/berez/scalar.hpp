// Immutable symbolic scalar expressions: evaluation, differentiation,
// substitution, and a flattened form for fast repeated evaluation.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace berez {

using Env = std::map<std::string, double, std::less<>>;
using Rng = std::mt19937_64;

enum class NodeKind {
  Const,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Pow,    // rational exponent pnum/pden
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Atan2,  // atan2(a, b)
  Guard,  // value of b while a < 1, hard zero otherwise
};

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  NodeKind kind;
  double value = 0.0;  // Const
  std::string name;    // Var
  int pnum = 0;        // Pow numerator
  int pden = 1;        // Pow denominator, >= 1, coprime to pnum
  NodePtr a, b;
};

class ScalarExpr {
 public:
  ScalarExpr();  // zero
  ScalarExpr(double c);
  explicit ScalarExpr(NodePtr n) : node_(std::move(n)) {}
  static ScalarExpr var(std::string name);

  const NodePtr& node() const { return node_; }
  NodeKind kind() const { return node_->kind; }

  bool is_const() const;
  bool is_zero() const;  // structurally the constant 0
  bool is_one() const;
  double const_value() const;  // requires is_const()

  double eval(const Env& env) const;
  ScalarExpr diff(const std::string& var) const;
  ScalarExpr subst(const std::map<std::string, ScalarExpr>& repl) const;
  std::string str() const;
  bool depends_on(const std::string& var) const;

 private:
  NodePtr node_;
};

ScalarExpr operator+(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator-(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator*(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator/(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator-(const ScalarExpr& x);

ScalarExpr pow_i(const ScalarExpr& x, int n);
// principal branch; fractional exponents require a non-negative base
ScalarExpr pow_r(const ScalarExpr& x, int num, int den);
ScalarExpr sqrt_e(const ScalarExpr& x);
ScalarExpr exp_e(const ScalarExpr& x);
ScalarExpr log_e(const ScalarExpr& x);
ScalarExpr sin_e(const ScalarExpr& x);
ScalarExpr cos_e(const ScalarExpr& x);
ScalarExpr atan2_e(const ScalarExpr& y, const ScalarExpr& x);
ScalarExpr guard_lt1(const ScalarExpr& cond, const ScalarExpr& body);

// smooth cutoffs, peak value 1, hard zero outside the support
ScalarExpr bump(const ScalarExpr& x);   // support |x| < 1
ScalarExpr bumps(const ScalarExpr& s);  // support s < 1, for s a squared radius

bool structurally_equal(const ScalarExpr& x, const ScalarExpr& y);

// Expression flattened into a node pool for memoized evaluation.
class CompiledExpr {
 public:
  CompiledExpr(const ScalarExpr& e, const std::vector<std::string>& var_order);
  double eval(const double* vars) const;
  size_t size() const { return nodes_.size(); }

 private:
  struct Flat {
    NodeKind kind;
    double value;
    int varidx;
    int pnum, pden;
    int a, b;
  };
  double eval_node(int i, const double* vars) const;
  std::vector<Flat> nodes_;
  int root_;
  mutable std::vector<double> memo_;
  mutable std::vector<uint8_t> have_;
  mutable uint64_t stamp_ = 0;
  mutable std::vector<uint64_t> seen_;
};

// Randomized equality on a box: relative tolerance against the larger scale.
bool numerically_equal(const ScalarExpr& x, const ScalarExpr& y,
                       const std::vector<std::string>& vars,
                       const std::vector<std::array<double, 2>>& box, Rng& rng,
                       int n = 20, double tol = 1e-10);

}  // namespace berez
