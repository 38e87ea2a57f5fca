#include "berez/scalar.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "berez/errors.hpp"

namespace berez {

namespace {

NodePtr make(NodeKind k) { return std::make_shared<ExprNode>(ExprNode{k}); }

NodePtr make_const(double v) {
  auto n = std::make_shared<ExprNode>(ExprNode{NodeKind::Const});
  const_cast<ExprNode&>(*n).value = v;
  return n;
}

NodePtr make1(NodeKind k, NodePtr a) {
  auto n = std::make_shared<ExprNode>(ExprNode{k});
  auto& m = const_cast<ExprNode&>(*n);
  m.a = std::move(a);
  return n;
}

NodePtr make2(NodeKind k, NodePtr a, NodePtr b) {
  auto n = std::make_shared<ExprNode>(ExprNode{k});
  auto& m = const_cast<ExprNode&>(*n);
  m.a = std::move(a);
  m.b = std::move(b);
  return n;
}

bool node_equal(const ExprNode* x, const ExprNode* y) {
  if (x == y) return true;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case NodeKind::Const:
      return x->value == y->value;
    case NodeKind::Var:
      return x->name == y->name;
    case NodeKind::Pow:
      if (x->pnum != y->pnum || x->pden != y->pden) return false;
      return node_equal(x->a.get(), y->a.get());
    default:
      if (bool(x->a) != bool(y->a) || bool(x->b) != bool(y->b)) return false;
      if (x->a && !node_equal(x->a.get(), y->a.get())) return false;
      if (x->b && !node_equal(x->b.get(), y->b.get())) return false;
      return true;
  }
}

const ExprNode* pow_base(const ExprNode* x) {
  return x->kind == NodeKind::Pow ? x->a.get() : x;
}

std::pair<int, int> pow_expo(const ExprNode* x) {
  return x->kind == NodeKind::Pow ? std::pair{x->pnum, x->pden} : std::pair{1, 1};
}

double rational_pow(double base, int num, int den) {
  if (den == 1) {
    if (base == 0.0 && num < 0) throw DomainError("zero to negative power");
    return std::pow(base, num);
  }
  if (base < 0.0) throw DomainError("fractional power of negative value");
  if (base == 0.0 && num < 0) throw DomainError("zero to negative power");
  return std::pow(base, double(num) / double(den));
}

}  // namespace

ScalarExpr::ScalarExpr() : node_(make_const(0.0)) {}
ScalarExpr::ScalarExpr(double c) : node_(make_const(c)) {}

ScalarExpr ScalarExpr::var(std::string name) {
  auto n = std::make_shared<ExprNode>(ExprNode{NodeKind::Var});
  const_cast<ExprNode&>(*n).name = std::move(name);
  return ScalarExpr(n);
}

bool ScalarExpr::is_const() const { return node_->kind == NodeKind::Const; }
bool ScalarExpr::is_zero() const { return is_const() && node_->value == 0.0; }
bool ScalarExpr::is_one() const { return is_const() && node_->value == 1.0; }
double ScalarExpr::const_value() const { return node_->value; }

ScalarExpr operator+(const ScalarExpr& x, const ScalarExpr& y) {
  if (x.is_zero()) return y;
  if (y.is_zero()) return x;
  if (x.is_const() && y.is_const())
    return ScalarExpr(x.const_value() + y.const_value());
  return ScalarExpr(make2(NodeKind::Add, x.node(), y.node()));
}

ScalarExpr operator-(const ScalarExpr& x, const ScalarExpr& y) {
  if (y.is_zero()) return x;
  if (x.is_zero()) return -y;
  if (x.is_const() && y.is_const())
    return ScalarExpr(x.const_value() - y.const_value());
  if (structurally_equal(x, y)) return ScalarExpr(0.0);
  return ScalarExpr(make2(NodeKind::Sub, x.node(), y.node()));
}

ScalarExpr operator*(const ScalarExpr& x, const ScalarExpr& y) {
  if (x.is_zero() || y.is_zero()) return ScalarExpr(0.0);
  if (x.is_one()) return y;
  if (y.is_one()) return x;
  if (x.is_const() && y.is_const())
    return ScalarExpr(x.const_value() * y.const_value());
  const ExprNode* bx = pow_base(x.node().get());
  const ExprNode* by = pow_base(y.node().get());
  if (bx->kind != NodeKind::Const && node_equal(bx, by)) {
    ScalarExpr base(x.node()->kind == NodeKind::Pow ? x.node()->a : x.node());
    auto [nx, dx] = pow_expo(x.node().get());
    auto [ny, dy] = pow_expo(y.node().get());
    return pow_r(base, nx * dy + ny * dx, dx * dy);
  }
  return ScalarExpr(make2(NodeKind::Mul, x.node(), y.node()));
}

ScalarExpr operator/(const ScalarExpr& x, const ScalarExpr& y) {
  if (x.is_zero()) return x;
  if (y.is_one()) return x;
  if (x.is_const() && y.is_const() && y.const_value() != 0.0)
    return ScalarExpr(x.const_value() / y.const_value());
  if (structurally_equal(x, y)) return ScalarExpr(1.0);
  return ScalarExpr(make2(NodeKind::Div, x.node(), y.node()));
}

ScalarExpr operator-(const ScalarExpr& x) {
  if (x.is_const()) return ScalarExpr(-x.const_value());
  if (x.kind() == NodeKind::Neg) return ScalarExpr(x.node()->a);
  return ScalarExpr(make1(NodeKind::Neg, x.node()));
}

ScalarExpr pow_i(const ScalarExpr& x, int n) { return pow_r(x, n, 1); }

ScalarExpr pow_r(const ScalarExpr& x, int num, int den) {
  if (den == 0) throw DomainError("power with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  int g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) return ScalarExpr(1.0);
  if (num == 1 && den == 1) return x;
  if (x.is_const()) {
    double v = x.const_value();
    bool in_domain = (den == 1 || v >= 0.0) && !(v == 0.0 && num < 0);
    if (in_domain) return ScalarExpr(rational_pow(v, num, den));
  }
  // merge nested powers only under an integer outer exponent; a fractional
  // outer exponent over e.g. x^2 must keep the |x| semantics of the nest
  if (x.kind() == NodeKind::Pow && den == 1)
    return pow_r(ScalarExpr(x.node()->a), x.node()->pnum * num, x.node()->pden);
  auto node = std::make_shared<ExprNode>(ExprNode{NodeKind::Pow});
  auto& m = const_cast<ExprNode&>(*node);
  m.a = x.node();
  m.pnum = num;
  m.pden = den;
  return ScalarExpr(node);
}

namespace {

ScalarExpr fold1(NodeKind k, const ScalarExpr& x, double (*fn)(double),
                 bool (*ok)(double)) {
  if (x.is_const() && ok(x.const_value()))
    return ScalarExpr(fn(x.const_value()));
  return ScalarExpr(make1(k, x.node()));
}

}  // namespace

ScalarExpr sqrt_e(const ScalarExpr& x) {
  return fold1(NodeKind::Sqrt, x, [](double v) { return std::sqrt(v); },
               [](double v) { return v >= 0.0; });
}
ScalarExpr exp_e(const ScalarExpr& x) {
  return fold1(NodeKind::Exp, x, [](double v) { return std::exp(v); },
               [](double) { return true; });
}
ScalarExpr log_e(const ScalarExpr& x) {
  return fold1(NodeKind::Log, x, [](double v) { return std::log(v); },
               [](double v) { return v > 0.0; });
}
ScalarExpr sin_e(const ScalarExpr& x) {
  return fold1(NodeKind::Sin, x, [](double v) { return std::sin(v); },
               [](double) { return true; });
}
ScalarExpr cos_e(const ScalarExpr& x) {
  return fold1(NodeKind::Cos, x, [](double v) { return std::cos(v); },
               [](double) { return true; });
}

ScalarExpr atan2_e(const ScalarExpr& y, const ScalarExpr& x) {
  if (y.is_const() && x.is_const() &&
      (y.const_value() != 0.0 || x.const_value() != 0.0))
    return ScalarExpr(std::atan2(y.const_value(), x.const_value()));
  return ScalarExpr(make2(NodeKind::Atan2, y.node(), x.node()));
}

ScalarExpr guard_lt1(const ScalarExpr& cond, const ScalarExpr& body) {
  if (body.is_zero()) return body;
  if (cond.is_const())
    return cond.const_value() < 1.0 ? body : ScalarExpr(0.0);
  return ScalarExpr(make2(NodeKind::Guard, cond.node(), body.node()));
}

ScalarExpr bump(const ScalarExpr& x) {
  ScalarExpr x2 = pow_i(x, 2);
  return guard_lt1(x2, exp_e(ScalarExpr(1.0) - ScalarExpr(1.0) / (ScalarExpr(1.0) - x2)));
}

ScalarExpr bumps(const ScalarExpr& s) {
  return guard_lt1(s, exp_e(ScalarExpr(1.0) - ScalarExpr(1.0) / (ScalarExpr(1.0) - s)));
}

bool structurally_equal(const ScalarExpr& x, const ScalarExpr& y) {
  return node_equal(x.node().get(), y.node().get());
}

namespace {

double eval_rec(const ExprNode* n, const Env& env,
                std::unordered_map<const ExprNode*, double>& memo) {
  auto it = memo.find(n);
  if (it != memo.end()) return it->second;
  double r = 0.0;
  switch (n->kind) {
    case NodeKind::Const:
      r = n->value;
      break;
    case NodeKind::Var: {
      auto v = env.find(n->name);
      if (v == env.end()) throw DomainError("unbound variable " + n->name);
      r = v->second;
      break;
    }
    case NodeKind::Add:
      r = eval_rec(n->a.get(), env, memo) + eval_rec(n->b.get(), env, memo);
      break;
    case NodeKind::Sub:
      r = eval_rec(n->a.get(), env, memo) - eval_rec(n->b.get(), env, memo);
      break;
    case NodeKind::Mul:
      r = eval_rec(n->a.get(), env, memo) * eval_rec(n->b.get(), env, memo);
      break;
    case NodeKind::Div: {
      double den = eval_rec(n->b.get(), env, memo);
      if (den == 0.0) throw DomainError("division by zero");
      r = eval_rec(n->a.get(), env, memo) / den;
      break;
    }
    case NodeKind::Neg:
      r = -eval_rec(n->a.get(), env, memo);
      break;
    case NodeKind::Pow:
      r = rational_pow(eval_rec(n->a.get(), env, memo), n->pnum, n->pden);
      break;
    case NodeKind::Sqrt: {
      double v = eval_rec(n->a.get(), env, memo);
      if (v < 0.0) throw DomainError("sqrt of negative value");
      r = std::sqrt(v);
      break;
    }
    case NodeKind::Exp:
      r = std::exp(eval_rec(n->a.get(), env, memo));
      break;
    case NodeKind::Log: {
      double v = eval_rec(n->a.get(), env, memo);
      if (v <= 0.0) throw DomainError("log of non-positive value");
      r = std::log(v);
      break;
    }
    case NodeKind::Sin:
      r = std::sin(eval_rec(n->a.get(), env, memo));
      break;
    case NodeKind::Cos:
      r = std::cos(eval_rec(n->a.get(), env, memo));
      break;
    case NodeKind::Atan2:
      r = std::atan2(eval_rec(n->a.get(), env, memo),
                     eval_rec(n->b.get(), env, memo));
      break;
    case NodeKind::Guard:
      r = eval_rec(n->a.get(), env, memo) < 1.0
              ? eval_rec(n->b.get(), env, memo)
              : 0.0;
      break;
  }
  memo[n] = r;
  return r;
}

}  // namespace

double ScalarExpr::eval(const Env& env) const {
  std::unordered_map<const ExprNode*, double> memo;
  return eval_rec(node_.get(), env, memo);
}

namespace {

ScalarExpr diff_rec(const NodePtr& np, const std::string& var,
                    std::unordered_map<const ExprNode*, ScalarExpr>& memo) {
  const ExprNode* n = np.get();
  auto it = memo.find(n);
  if (it != memo.end()) return it->second;
  ScalarExpr a = n->a ? ScalarExpr(n->a) : ScalarExpr();
  ScalarExpr b = n->b ? ScalarExpr(n->b) : ScalarExpr();
  ScalarExpr da = n->a ? diff_rec(n->a, var, memo) : ScalarExpr();
  ScalarExpr db = n->b ? diff_rec(n->b, var, memo) : ScalarExpr();
  ScalarExpr r;
  switch (n->kind) {
    case NodeKind::Const:
      break;
    case NodeKind::Var:
      r = ScalarExpr(n->name == var ? 1.0 : 0.0);
      break;
    case NodeKind::Add:
      r = da + db;
      break;
    case NodeKind::Sub:
      r = da - db;
      break;
    case NodeKind::Mul:
      r = da * b + a * db;
      break;
    case NodeKind::Div:
      r = (da * b - a * db) / pow_i(b, 2);
      break;
    case NodeKind::Neg:
      r = -da;
      break;
    case NodeKind::Pow:
      r = ScalarExpr(double(n->pnum) / double(n->pden)) *
          pow_r(a, n->pnum - n->pden, n->pden) * da;
      break;
    case NodeKind::Sqrt:
      r = da / (ScalarExpr(2.0) * sqrt_e(a));
      break;
    case NodeKind::Exp:
      r = da * exp_e(a);
      break;
    case NodeKind::Log:
      r = da / a;
      break;
    case NodeKind::Sin:
      r = da * cos_e(a);
      break;
    case NodeKind::Cos:
      r = -(da * sin_e(a));
      break;
    case NodeKind::Atan2:
      // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
      r = (b * da - a * db) / (pow_i(a, 2) + pow_i(b, 2));
      break;
    case NodeKind::Guard:
      r = guard_lt1(a, db);
      break;
  }
  memo.emplace(n, r);
  return r;
}

}  // namespace

ScalarExpr ScalarExpr::diff(const std::string& var) const {
  std::unordered_map<const ExprNode*, ScalarExpr> memo;
  return diff_rec(node_, var, memo);
}

namespace {

ScalarExpr subst_rec(const NodePtr& np,
                     const std::map<std::string, ScalarExpr>& repl,
                     std::unordered_map<const ExprNode*, ScalarExpr>& memo) {
  const ExprNode* n = np.get();
  auto it = memo.find(n);
  if (it != memo.end()) return it->second;
  ScalarExpr r;
  switch (n->kind) {
    case NodeKind::Const:
      r = ScalarExpr(np);
      break;
    case NodeKind::Var: {
      auto v = repl.find(n->name);
      r = v == repl.end() ? ScalarExpr(np) : v->second;
      break;
    }
    default: {
      ScalarExpr a = n->a ? subst_rec(n->a, repl, memo) : ScalarExpr();
      ScalarExpr b = n->b ? subst_rec(n->b, repl, memo) : ScalarExpr();
      switch (n->kind) {
        case NodeKind::Add: r = a + b; break;
        case NodeKind::Sub: r = a - b; break;
        case NodeKind::Mul: r = a * b; break;
        case NodeKind::Div: r = a / b; break;
        case NodeKind::Neg: r = -a; break;
        case NodeKind::Pow: r = pow_r(a, n->pnum, n->pden); break;
        case NodeKind::Sqrt: r = sqrt_e(a); break;
        case NodeKind::Exp: r = exp_e(a); break;
        case NodeKind::Log: r = log_e(a); break;
        case NodeKind::Sin: r = sin_e(a); break;
        case NodeKind::Cos: r = cos_e(a); break;
        case NodeKind::Atan2: r = atan2_e(a, b); break;
        case NodeKind::Guard: r = guard_lt1(a, b); break;
        default: break;
      }
      break;
    }
  }
  memo.emplace(n, r);
  return r;
}

void str_rec(const ExprNode* n, std::string& out) {
  char buf[40];
  switch (n->kind) {
    case NodeKind::Const:
      snprintf(buf, sizeof buf, "%.17g", n->value);
      out += buf;
      break;
    case NodeKind::Var:
      out += n->name;
      break;
    case NodeKind::Add:
    case NodeKind::Sub:
    case NodeKind::Mul:
    case NodeKind::Div: {
      const char* op = n->kind == NodeKind::Add   ? " + "
                       : n->kind == NodeKind::Sub ? " - "
                       : n->kind == NodeKind::Mul ? "*"
                                                  : "/";
      out += '(';
      str_rec(n->a.get(), out);
      out += op;
      str_rec(n->b.get(), out);
      out += ')';
      break;
    }
    case NodeKind::Neg:
      out += "(-";
      str_rec(n->a.get(), out);
      out += ')';
      break;
    case NodeKind::Pow:
      out += '(';
      str_rec(n->a.get(), out);
      out += '^';
      if (n->pden == 1)
        snprintf(buf, sizeof buf, "%d", n->pnum);
      else
        snprintf(buf, sizeof buf, "(%d/%d)", n->pnum, n->pden);
      out += buf;
      out += ')';
      break;
    case NodeKind::Sqrt:
    case NodeKind::Exp:
    case NodeKind::Log:
    case NodeKind::Sin:
    case NodeKind::Cos: {
      const char* fn = n->kind == NodeKind::Sqrt  ? "sqrt"
                       : n->kind == NodeKind::Exp ? "exp"
                       : n->kind == NodeKind::Log ? "log"
                       : n->kind == NodeKind::Sin ? "sin"
                                                  : "cos";
      out += fn;
      out += '(';
      str_rec(n->a.get(), out);
      out += ')';
      break;
    }
    case NodeKind::Atan2:
      out += "atan2(";
      str_rec(n->a.get(), out);
      out += ", ";
      str_rec(n->b.get(), out);
      out += ')';
      break;
    case NodeKind::Guard:
      out += "guardlt1(";
      str_rec(n->a.get(), out);
      out += ", ";
      str_rec(n->b.get(), out);
      out += ')';
      break;
  }
}

void depends_rec(const ExprNode* n, const std::string& var, bool& found,
                 std::unordered_set<const ExprNode*>& seen) {
  if (found || !seen.insert(n).second) return;
  if (n->kind == NodeKind::Var) {
    if (n->name == var) found = true;
    return;
  }
  if (n->a) depends_rec(n->a.get(), var, found, seen);
  if (n->b) depends_rec(n->b.get(), var, found, seen);
}

}  // namespace

ScalarExpr ScalarExpr::subst(const std::map<std::string, ScalarExpr>& repl) const {
  std::unordered_map<const ExprNode*, ScalarExpr> memo;
  return subst_rec(node_, repl, memo);
}

std::string ScalarExpr::str() const {
  std::string out;
  str_rec(node_.get(), out);
  return out;
}

bool ScalarExpr::depends_on(const std::string& var) const {
  bool found = false;
  std::unordered_set<const ExprNode*> seen;
  depends_rec(node_.get(), var, found, seen);
  return found;
}

CompiledExpr::CompiledExpr(const ScalarExpr& e,
                           const std::vector<std::string>& var_order) {
  std::unordered_map<const ExprNode*, int> index;
  auto flatten = [&](auto&& self, const ExprNode* n) -> int {
    auto it = index.find(n);
    if (it != index.end()) return it->second;
    Flat f{n->kind, n->value, -1, n->pnum, n->pden, -1, -1};
    if (n->kind == NodeKind::Var) {
      for (size_t i = 0; i < var_order.size(); ++i)
        if (var_order[i] == n->name) f.varidx = int(i);
      if (f.varidx < 0) throw DomainError("unbound variable " + n->name);
    }
    if (n->a) f.a = self(self, n->a.get());
    if (n->b) f.b = self(self, n->b.get());
    nodes_.push_back(f);
    int id = int(nodes_.size()) - 1;
    index.emplace(n, id);
    return id;
  };
  root_ = flatten(flatten, e.node().get());
  memo_.assign(nodes_.size(), 0.0);
  seen_.assign(nodes_.size(), 0);
}

double CompiledExpr::eval_node(int i, const double* vars) const {
  if (seen_[i] == stamp_) return memo_[i];
  const Flat& n = nodes_[i];
  double r = 0.0;
  switch (n.kind) {
    case NodeKind::Const: r = n.value; break;
    case NodeKind::Var: r = vars[n.varidx]; break;
    case NodeKind::Add: r = eval_node(n.a, vars) + eval_node(n.b, vars); break;
    case NodeKind::Sub: r = eval_node(n.a, vars) - eval_node(n.b, vars); break;
    case NodeKind::Mul: r = eval_node(n.a, vars) * eval_node(n.b, vars); break;
    case NodeKind::Div: {
      double den = eval_node(n.b, vars);
      if (den == 0.0) throw DomainError("division by zero");
      r = eval_node(n.a, vars) / den;
      break;
    }
    case NodeKind::Neg: r = -eval_node(n.a, vars); break;
    case NodeKind::Pow:
      r = rational_pow(eval_node(n.a, vars), n.pnum, n.pden);
      break;
    case NodeKind::Sqrt: {
      double v = eval_node(n.a, vars);
      if (v < 0.0) throw DomainError("sqrt of negative value");
      r = std::sqrt(v);
      break;
    }
    case NodeKind::Exp: r = std::exp(eval_node(n.a, vars)); break;
    case NodeKind::Log: {
      double v = eval_node(n.a, vars);
      if (v <= 0.0) throw DomainError("log of non-positive value");
      r = std::log(v);
      break;
    }
    case NodeKind::Sin: r = std::sin(eval_node(n.a, vars)); break;
    case NodeKind::Cos: r = std::cos(eval_node(n.a, vars)); break;
    case NodeKind::Atan2:
      r = std::atan2(eval_node(n.a, vars), eval_node(n.b, vars));
      break;
    case NodeKind::Guard:
      r = eval_node(n.a, vars) < 1.0 ? eval_node(n.b, vars) : 0.0;
      break;
  }
  memo_[i] = r;
  seen_[i] = stamp_;
  return r;
}

double CompiledExpr::eval(const double* vars) const {
  ++stamp_;
  return eval_node(root_, vars);
}

bool numerically_equal(const ScalarExpr& x, const ScalarExpr& y,
                       const std::vector<std::string>& vars,
                       const std::vector<std::array<double, 2>>& box, Rng& rng,
                       int n, double tol) {
  CompiledExpr cx(x, vars), cy(y, vars);
  std::vector<double> pt(vars.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  int done = 0, attempts = 0;
  while (done < n && attempts < 50 * n) {
    ++attempts;
    for (size_t i = 0; i < vars.size(); ++i)
      pt[i] = box[i][0] + (box[i][1] - box[i][0]) * uni(rng);
    double vx, vy;
    try {
      vx = cx.eval(pt.data());
      vy = cy.eval(pt.data());
    } catch (const DomainError&) {
      continue;  // singular sample point, draw another
    }
    double scale = std::max({1.0, std::abs(vx), std::abs(vy)});
    if (std::abs(vx - vy) > tol * scale) return false;
    ++done;
  }
  if (done < n) throw DomainError("numerically_equal: domain too singular");
  return true;
}

}  // namespace berez
