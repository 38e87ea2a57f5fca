#include "berez/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>
#include <sstream>

#include "berez/errors.hpp"
#include "json.hpp"

namespace berez {

namespace {

const double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

bool valid_key(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

bool valid_name(const std::string& s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0])))
    return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// File structure.

const ScenarioEntry* ScenarioSection::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

ScenarioFile parse_scenario_text(const std::string& text) {
  ScenarioFile file;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("section header must end with ']'", line_no);
      std::istringstream hdr(line.substr(1, line.size() - 2));
      std::string kind, word, name;
      hdr >> kind;
      while (hdr >> word) {
        if (!name.empty()) name += ' ';
        name += word;
      }
      if (kind.empty())
        throw ParseError("empty section header", line_no);
      if (!valid_key(kind))
        throw ParseError("bad section kind '" + kind + "'", line_no);
      if (!name.empty() && !valid_name(name))
        throw ParseError("bad section name '" + name + "'", line_no);
      file.sections.push_back({kind, name, line_no, {}});
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value' or a '[section]' header",
                       line_no);
    if (file.sections.empty())
      throw ParseError("entry appears before any section header", line_no);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw ParseError("bad key '" + key + "'", line_no);
    if (value.empty())
      throw ParseError("empty value for key '" + key + "'", line_no);
    ScenarioSection& sec = file.sections.back();
    if (sec.find(key))
      throw ParseError("duplicate key '" + key + "' in section [" + sec.kind +
                           (sec.name.empty() ? "" : " " + sec.name) + "]",
                       line_no);
    sec.entries.push_back({key, value, line_no});
  }
  if (file.sections.empty())
    throw ParseError("scenario has no sections", line_no ? line_no : 1);
  return file;
}

std::string render_scenario(const ScenarioFile& file) {
  std::string out;
  for (const auto& sec : file.sections) {
    if (!out.empty()) out += "\n";
    out += "[" + sec.kind + (sec.name.empty() ? "" : " " + sec.name) + "]\n";
    for (const auto& e : sec.entries) out += e.key + " = " + e.value + "\n";
  }
  return out;
}

bool same_structure(const ScenarioFile& a, const ScenarioFile& b) {
  if (a.sections.size() != b.sections.size()) return false;
  for (size_t i = 0; i < a.sections.size(); ++i) {
    const auto& x = a.sections[i];
    const auto& y = b.sections[i];
    if (x.kind != y.kind || x.name != y.name) return false;
    if (x.entries.size() != y.entries.size()) return false;
    for (size_t j = 0; j < x.entries.size(); ++j)
      if (x.entries[j].key != y.entries[j].key ||
          x.entries[j].value != y.entries[j].value)
        return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Expression grammar.

namespace {

struct Tok {
  enum Kind { Num, Ident, Op, End } kind = End;
  std::string text;
  double num = 0.0;
  bool is_int = false;
  int col = 0;
};

std::vector<Tok> lex(const std::string& s, int line) {
  std::vector<Tok> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == ' ' || c == '\t') {
      ++i;
      continue;
    }
    int col = int(i) + 1;
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < s.size() &&
         std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      size_t j = i;
      bool dot = false, expo = false;
      while (j < s.size()) {
        char d = s[j];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++j;
        } else if (d == '.' && !dot && !expo) {
          dot = true;
          ++j;
        } else if ((d == 'e' || d == 'E') && !expo && j > i) {
          expo = true;
          ++j;
          if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
        } else {
          break;
        }
      }
      std::string lit = s.substr(i, j - i);
      char* end = nullptr;
      double v = std::strtod(lit.c_str(), &end);
      if (end != lit.c_str() + lit.size())
        throw ParseError("bad number '" + lit + "' at column " +
                             std::to_string(col), line);
      out.push_back({Tok::Num, lit, v, !dot && !expo, col});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                              s[j] == '_'))
        ++j;
      out.push_back({Tok::Ident, s.substr(i, j - i), 0.0, false, col});
      i = j;
      continue;
    }
    if (std::string("+-*/^(),").find(c) != std::string::npos) {
      out.push_back({Tok::Op, std::string(1, c), 0.0, false, col});
      ++i;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c +
                         "' at column " + std::to_string(col), line);
  }
  out.push_back({Tok::End, "", 0.0, false, int(s.size()) + 1});
  return out;
}

class ExprParser {
 public:
  ExprParser(const std::string& text, int line, const ExprScope& scope)
      : scope_(scope), line_(line), toks_(lex(text, line)) {}

  SuperNumber parse() {
    SuperNumber r = expr();
    if (cur().kind != Tok::End)
      fail("unexpected trailing input '" + cur().text + "'", cur().col);
    return r;
  }

 private:
  const ExprScope& scope_;
  int line_;
  std::vector<Tok> toks_;
  size_t i_ = 0;

  const Tok& cur() const { return toks_[i_]; }
  const Tok& next() { return toks_[i_++]; }
  bool eat_op(const std::string& t) {
    if (cur().kind == Tok::Op && cur().text == t) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect_op(const std::string& t) {
    if (!eat_op(t))
      fail("expected '" + t + "'", cur().col);
  }
  [[noreturn]] void fail(const std::string& msg, int col) const {
    throw ParseError(msg + " (column " + std::to_string(col) + ")", line_);
  }

  SuperNumber constant(double v) const {
    return SuperNumber(scope_.q, ScalarExpr(v));
  }

  SuperNumber lift1(ScalarExpr (*prim)(const ScalarExpr&),
                    const SuperNumber& a) const {
    if (a.soul().is_zero())
      return SuperNumber(scope_.q, prim(a.body()));
    return compose_scalar(prim(ScalarExpr::var("#t")), {"#t"}, {a});
  }

  SuperNumber sdiv(const SuperNumber& a, const SuperNumber& b, int col) const {
    if (b.is_zero()) fail("division by a structural zero", col);
    if (b.soul().is_zero()) {
      SuperNumber r(a.q());
      for (const auto& [m, c] : a.terms()) r.set(m, c / b.body());
      return r;
    }
    return a * invert_even(b);
  }

  SuperNumber spow(const SuperNumber& a, int num, int den, int col) const {
    if (den == 1) {
      if (num >= 0) return pow_sn(a, num);
      if (a.soul().is_zero())
        return SuperNumber(scope_.q, pow_i(a.body(), num));
      return pow_sn(invert_even(a), -num);
    }
    if (den <= 0) fail("rational exponent needs a positive denominator", col);
    if (a.soul().is_zero())
      return SuperNumber(scope_.q, pow_r(a.body(), num, den));
    return compose_scalar(pow_r(ScalarExpr::var("#t"), num, den), {"#t"}, {a});
  }

  SuperNumber expr() {
    SuperNumber r = term();
    for (;;) {
      if (eat_op("+"))
        r = r + term();
      else if (eat_op("-"))
        r = r - term();
      else
        return r;
    }
  }

  SuperNumber term() {
    SuperNumber r = unary();
    for (;;) {
      int col = cur().col;
      if (eat_op("*"))
        r = r * unary();
      else if (eat_op("/"))
        r = sdiv(r, unary(), col);
      else
        return r;
    }
  }

  SuperNumber unary() {
    if (eat_op("-")) return -unary();
    if (eat_op("+")) return unary();
    return postfix();
  }

  SuperNumber postfix() {
    SuperNumber r = atom();
    while (cur().kind == Tok::Op && cur().text == "^") {
      int col = cur().col;
      ++i_;
      auto [num, den] = exponent();
      r = spow(r, num, den, col);
    }
    return r;
  }

  int int_literal() {
    int sign = 1;
    if (eat_op("-")) sign = -1;
    if (cur().kind != Tok::Num || !cur().is_int)
      fail("expected an integer", cur().col);
    double v = next().num;
    return sign * int(v);
  }

  // integer, or (num/den) with integer parts
  std::pair<int, int> exponent() {
    if (eat_op("(")) {
      int num = int_literal();
      expect_op("/");
      int den = int_literal();
      expect_op(")");
      return {num, den};
    }
    return {int_literal(), 1};
  }

  SuperNumber atom() {
    if (cur().kind == Tok::Num) return constant(next().num);
    if (eat_op("(")) {
      SuperNumber r = expr();
      expect_op(")");
      return r;
    }
    if (cur().kind != Tok::Ident)
      fail("expected a value, found '" +
               (cur().kind == Tok::End ? std::string("end of input")
                                       : cur().text) + "'",
           cur().col);
    Tok id = next();
    if (cur().kind == Tok::Op && cur().text == "(") return call(id);
    return name(id);
  }

  SuperNumber name(const Tok& id) const {
    for (size_t k = 0; k < scope_.evars.size(); ++k)
      if (scope_.evars[k] == id.text)
        return SuperNumber(scope_.q, ScalarExpr::var(id.text));
    for (size_t k = 0; k < scope_.onames.size(); ++k)
      if (scope_.onames[k] == id.text) {
        SuperNumber r(scope_.q);
        r.set(1u << k, ScalarExpr(1.0));
        return r;
      }
    auto it = scope_.consts.find(id.text);
    if (it != scope_.consts.end()) return constant(it->second);
    fail("unknown identifier '" + id.text + "'", id.col);
  }

  std::vector<SuperNumber> args(int lo, int hi, const Tok& id) {
    expect_op("(");
    std::vector<SuperNumber> out;
    if (!eat_op(")")) {
      out.push_back(expr());
      while (eat_op(",")) out.push_back(expr());
      expect_op(")");
    }
    if (int(out.size()) < lo || int(out.size()) > hi)
      fail("wrong number of arguments to " + id.text, id.col);
    return out;
  }

  SuperNumber call(const Tok& id) {
    if (id.text == "pull") return pull_call(id);
    if (id.text == "sin") return lift1(sin_e, args(1, 1, id)[0]);
    if (id.text == "cos") return lift1(cos_e, args(1, 1, id)[0]);
    if (id.text == "exp") return lift1(exp_e, args(1, 1, id)[0]);
    if (id.text == "log") return lift1(log_e, args(1, 1, id)[0]);
    if (id.text == "sqrt") return lift1(sqrt_e, args(1, 1, id)[0]);
    if (id.text == "bumps") return lift1(bumps, args(1, 1, id)[0]);
    if (id.text == "bump") {
      auto a = args(1, 3, id);
      if (a.size() == 2) fail("bump takes one or three arguments", id.col);
      if (a.size() == 1) return lift1(bump, a[0]);
      return lift1(bump, sdiv(a[0] - a[1], a[2], id.col));
    }
    if (id.text == "atan2") {
      auto a = args(2, 2, id);
      if (a[0].soul().is_zero() && a[1].soul().is_zero())
        return SuperNumber(scope_.q, atan2_e(a[0].body(), a[1].body()));
      return compose_scalar(
          atan2_e(ScalarExpr::var("#a"), ScalarExpr::var("#b")), {"#a", "#b"},
          {a[0], a[1]});
    }
    fail("unknown function '" + id.text + "'", id.col);
  }

  SuperNumber pull_call(const Tok& id) {
    expect_op("(");
    if (cur().kind != Tok::Ident)
      fail("pull expects a retraction or morphism name first", cur().col);
    Tok who = next();
    expect_op(",");
    SuperNumber a = expr();
    expect_op(")");
    if (!scope_.pulls)
      fail("pull is not available in this context", id.col);
    auto it = scope_.pulls->find(who.text);
    if (it == scope_.pulls->end())
      fail("unknown retraction or morphism '" + who.text + "'", who.col);
    const auto& images = it->second;
    size_t ne = scope_.pull_evars.size();
    std::vector<SuperNumber> evens(images.begin(), images.begin() + ne);
    std::vector<SuperNumber> odds(images.begin() + ne, images.end());
    return pullback_fn(scope_.pull_evars, evens, odds, a);
  }
};

}  // namespace

SuperNumber parse_super_expr(const std::string& text, int line,
                             const ExprScope& scope) {
  return ExprParser(text, line, scope).parse();
}

ScalarExpr parse_scalar_expr(const std::string& text, int line,
                             const ExprScope& scope) {
  ExprScope sc;
  sc.q = 0;
  sc.evars = scope.evars;
  sc.consts = scope.consts;
  return ExprParser(text, line, sc).parse().body();
}

double parse_const_expr(const std::string& text, int line,
                        const ExprScope& scope) {
  ExprScope sc;
  sc.q = 0;
  sc.consts = scope.consts;
  ScalarExpr e = ExprParser(text, line, sc).parse().body();
  try {
    double v = e.eval({});
    if (!std::isfinite(v))
      throw ParseError("constant expression is not finite", line);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("expected a constant expression, got '" + text + "'",
                     line);
  }
}

// ---------------------------------------------------------------------------
// Model building.

namespace {

struct Builder {
  const ScenarioFile& file;
  const ModelOverrides& over;
  Model m;
  std::map<std::string, std::vector<SuperNumber>> pulls;

  explicit Builder(const ScenarioFile& f, const ModelOverrides& o)
      : file(f), over(o) {}

  [[noreturn]] void fail(const std::string& msg, int line) const {
    throw ParseError(msg, line);
  }

  void check_keys(const ScenarioSection& sec,
                  const std::set<std::string>& allowed) const {
    for (const auto& e : sec.entries)
      if (!allowed.count(e.key))
        fail("unknown key '" + e.key + "' in section [" + sec.kind + "]",
             e.line);
  }

  const ScenarioEntry& need(const ScenarioSection& sec,
                            const std::string& key) const {
    const ScenarioEntry* e = sec.find(key);
    if (!e)
      fail("section [" + sec.kind + (sec.name.empty() ? "" : " " + sec.name) +
               "] needs a '" + key + "' entry",
           sec.line);
    return *e;
  }

  ExprScope scope() const {
    ExprScope sc;
    sc.q = m.chart.q;
    sc.evars = m.chart.evars;
    sc.onames = m.chart.onames;
    sc.consts = m.consts;
    sc.pulls = &pulls;
    sc.pull_evars = m.chart.evars;
    return sc;
  }

  double cnum(const ScenarioEntry& e) const {
    ExprScope sc;
    sc.consts = m.consts;
    return parse_const_expr(e.value, e.line, sc);
  }

  int cint(const ScenarioEntry& e) const {
    double v = cnum(e);
    if (v != std::floor(v))
      fail("'" + e.key + "' must be an integer", e.line);
    return int(v);
  }

  std::vector<std::array<double, 2>> box_list(const ScenarioEntry& e) const {
    std::vector<std::array<double, 2>> out;
    for (const std::string& item : split_list(e.value, ';')) {
      auto pair = split_list(item, ',');
      if (pair.size() != 2)
        fail("each box entry is 'lo, hi'", e.line);
      ExprScope sc;
      sc.consts = m.consts;
      double lo = parse_const_expr(pair[0], e.line, sc);
      double hi = parse_const_expr(pair[1], e.line, sc);
      if (!(lo < hi))
        fail("box entry needs lo < hi", e.line);
      out.push_back({lo, hi});
    }
    return out;
  }

  std::vector<std::string> name_list(const ScenarioEntry& e) const {
    std::vector<std::string> out;
    for (const std::string& item : split_list(e.value, ';')) {
      if (!valid_name(item))
        fail("bad name '" + item + "'", e.line);
      out.push_back(item);
    }
    return out;
  }

  const ScenarioSection* unique(const std::string& kind) const {
    const ScenarioSection* found = nullptr;
    for (const auto& sec : file.sections)
      if (sec.kind == kind) {
        if (found)
          fail("duplicate [" + kind + "] section", sec.line);
        found = &sec;
      }
    if (found && !found->name.empty())
      fail("section [" + kind + "] does not take a name", found->line);
    return found;
  }

  void build_consts() {
    m.consts["pi"] = kPi;
    if (const ScenarioSection* sec = unique("const"))
      for (const auto& e : sec->entries) {
        if (!valid_name(e.key))
          fail("bad constant name '" + e.key + "'", e.line);
        ExprScope sc;
        sc.consts = m.consts;
        m.consts[e.key] = parse_const_expr(e.value, e.line, sc);
      }
    for (const auto& [k, v] : over.consts) m.consts[k] = v;
  }

  void build_convention() {
    if (const ScenarioSection* sec = unique("convention")) {
      check_keys(*sec, {"s", "b"});
      if (const ScenarioEntry* e = sec->find("s")) {
        try {
          m.conv = Convention::parse(e->value);
        } catch (const Error& err) {
          fail(err.what(), e->line);
        }
      }
      if (const ScenarioEntry* e = sec->find("b")) {
        if (e->value == "p-plus-q")
          m.conv.bmode = BMode::PPlusQ;
        else if (e->value == "zero")
          m.conv.bmode = BMode::Zero;
        else
          fail("'b' must be 'p-plus-q' or 'zero'", e->line);
      }
    }
    if (over.smode) m.conv.smode = *over.smode;
  }

  void build_settings() {
    if (const ScenarioSection* sec = unique("settings")) {
      check_keys(*sec, {"order", "tolerance", "seed"});
      if (const ScenarioEntry* e = sec->find("order")) {
        m.order = cint(*e);
        if (m.order < 2) fail("'order' must be at least 2", e->line);
      }
      if (const ScenarioEntry* e = sec->find("tolerance")) {
        m.tolerance = cnum(*e);
        if (m.tolerance <= 0.0) fail("'tolerance' must be positive", e->line);
      }
      if (const ScenarioEntry* e = sec->find("seed"))
        m.seed = uint64_t(cint(*e));
    }
    if (over.order) m.order = *over.order;
    if (over.tolerance) m.tolerance = *over.tolerance;
  }

  std::vector<std::string> coord_names(const ScenarioEntry* e, int n,
                                       const std::string& stem,
                                       int line) const {
    std::vector<std::string> out;
    if (e) {
      out = name_list(*e);
      if (int(out.size()) != n)
        fail("expected " + std::to_string(n) + " names", e->line);
    } else {
      for (int i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
    }
    std::set<std::string> seen;
    for (const auto& s : out) {
      if (m.consts.count(s))
        fail("coordinate name '" + s + "' clashes with a constant", line);
      if (!seen.insert(s).second)
        fail("duplicate coordinate name '" + s + "'", line);
    }
    return out;
  }

  void build_chart() {
    const ScenarioSection* sec = unique("chart");
    if (!sec) fail("scenario needs a [chart] section", 1);
    check_keys(*sec, {"p", "q", "vars", "odd", "box", "params", "map", "mask"});
    int p = cint(need(*sec, "p"));
    int q = cint(need(*sec, "q"));
    if (p < 0 || q < 0 || p + q == 0)
      fail("chart needs p >= 0, q >= 0, p + q > 0", sec->line);
    std::vector<std::string> vars =
        coord_names(sec->find("vars"), p, "u", sec->line);
    std::vector<std::string> odd =
        coord_names(sec->find("odd"), q, "xi", sec->line);
    for (const auto& o : odd)
      if (std::find(vars.begin(), vars.end(), o) != vars.end())
        fail("name '" + o + "' is both even and odd", sec->line);

    Region reg;
    const ScenarioEntry* params = sec->find("params");
    const ScenarioEntry* map = sec->find("map");
    if (bool(params) != bool(map))
      fail("'params' and 'map' come together", sec->line);
    reg.params = params ? coord_names(params, int(name_list(*params).size()),
                                      "t", params->line)
                        : vars;
    reg.box = box_list(need(*sec, "box"));
    if (reg.box.size() != reg.params.size())
      fail("box needs one 'lo, hi' entry per parameter", sec->line);
    if (map) {
      reg.target_vars = vars;
      ExprScope sc;
      sc.evars = reg.params;
      sc.consts = m.consts;
      auto imgs = split_list(map->value, ';');
      if (int(imgs.size()) != p)
        fail("map needs one expression per chart variable", map->line);
      for (const auto& s : imgs)
        reg.map.push_back(parse_scalar_expr(s, map->line, sc));
    }
    if (const ScenarioEntry* e = sec->find("mask")) {
      if (map) fail("'mask' and 'map' are mutually exclusive", e->line);
      ExprScope sc;
      sc.evars = vars;
      sc.consts = m.consts;
      reg.mask = parse_scalar_expr(e->value, e->line, sc);
      m.notes.push_back(
          "masked region: indicator quadrature converges slowly near curved "
          "boundaries; prefer a mapped region");
    }
    m.chart = make_chart(p, q, vars, std::move(reg), odd);
    // the sign a fibre integral attaches to the top odd coefficient
    m.consts["otop"] = -double(m.conv.s_sign(p, q));
  }

  void build_named() {
    for (const auto& sec : file.sections) {
      if (sec.kind != "retraction" && sec.kind != "system" &&
          sec.kind != "morphism")
        continue;
      if (sec.name.empty())
        fail("[" + sec.kind + "] needs a name", sec.line);
      bool taken = m.retractions.count(sec.name) || m.systems.count(sec.name) ||
                   m.morphisms.count(sec.name);
      if (taken) fail("name '" + sec.name + "' is already defined", sec.line);
      if (sec.kind == "retraction")
        build_retraction(sec);
      else if (sec.kind == "system")
        build_system(sec);
      else
        build_morphism(sec);
    }
  }

  void build_retraction(const ScenarioSection& sec) {
    Retraction r;
    std::set<std::string> allowed(m.chart.evars.begin(), m.chart.evars.end());
    check_keys(sec, allowed);
    for (const auto& v : m.chart.evars) {
      const ScenarioEntry& e = need(sec, v);
      r.images.push_back(parse_super_expr(e.value, e.line, scope()));
    }
    std::vector<SuperNumber> full = r.images;
    for (int j = 0; j < m.chart.q; ++j) full.push_back(m.chart.odd_sn(j));
    pulls[sec.name] = std::move(full);
    m.retractions[sec.name] = std::move(r);
  }

  void build_system(const ScenarioSection& sec) {
    check_keys(sec, {"slots", "forward", "inverse"});
    AdaptedSystem sys;
    sys.name = sec.name;
    sys.slots = name_list(need(sec, "slots"));
    if (int(sys.slots.size()) != m.chart.p)
      fail("a system needs one slot per even coordinate", sec.line);
    const ScenarioEntry& fwd = need(sec, "forward");
    for (const auto& s : split_list(fwd.value, ';'))
      sys.forward.push_back(parse_super_expr(s, fwd.line, scope()));
    if (int(sys.forward.size()) != m.chart.p)
      fail("'forward' needs one expression per slot", fwd.line);
    const ScenarioEntry& inv = need(sec, "inverse");
    ExprScope sc;
    sc.evars = sys.slots;
    sc.consts = m.consts;
    for (const auto& s : split_list(inv.value, ';'))
      sys.inverse.push_back(parse_scalar_expr(s, inv.line, sc));
    if (int(sys.inverse.size()) != m.chart.p)
      fail("'inverse' needs one expression per chart variable", inv.line);
    m.systems[sec.name] = std::move(sys);
  }

  void build_morphism(const ScenarioSection& sec) {
    std::set<std::string> allowed(m.chart.evars.begin(), m.chart.evars.end());
    for (const auto& o : m.chart.onames) allowed.insert(o);
    check_keys(sec, allowed);
    std::vector<SuperNumber> imgs;
    for (const auto& v : m.chart.evars) {
      const ScenarioEntry* e = sec.find(v);
      imgs.push_back(e ? parse_super_expr(e->value, e->line, scope())
                       : m.chart.scalar(ScalarExpr::var(v)));
    }
    for (int j = 0; j < m.chart.q; ++j) {
      const ScenarioEntry* e = sec.find(m.chart.onames[j]);
      imgs.push_back(e ? parse_super_expr(e->value, e->line, scope())
                       : m.chart.odd_sn(j));
    }
    pulls[sec.name] = imgs;
    m.morphisms[sec.name] = std::move(imgs);
  }

  void build_density() {
    const ScenarioSection* sec = unique("density");
    if (!sec) return;
    std::string kind = "density";
    if (const ScenarioEntry* e = sec->find("kind")) kind = e->value;
    try {
      if (kind == "density") {
        check_keys(*sec, {"kind", "f"});
        const ScenarioEntry& e = need(*sec, "f");
        m.density = make_density(m.chart, DKind::Density,
                                 parse_super_expr(e.value, e.line, scope()),
                                 m.conv);
      } else if (kind == "form") {
        std::set<std::string> allowed{"kind"};
        int n = m.chart.p + m.chart.q;
        for (int i = 1; i <= n; ++i) allowed.insert("comp" + std::to_string(i));
        check_keys(*sec, allowed);
        std::vector<SuperNumber> comp;
        for (int i = 1; i <= n; ++i) {
          const ScenarioEntry& e = need(*sec, "comp" + std::to_string(i));
          comp.push_back(parse_super_expr(e.value, e.line, scope()));
        }
        m.form = make_integral_form(m.chart, std::move(comp), m.conv);
      } else {
        fail("density kind must be 'density' or 'form'", sec->line);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& err) {
      throw ScenarioError("[density]: " + std::string(err.what()));
    }
  }

  void build_faces() {
    for (const auto& sec : file.sections) {
      if (sec.kind != "face") continue;
      if (sec.name.empty()) fail("[face] needs a name", sec.line);
      if (m.faces.count(sec.name))
        fail("duplicate face '" + sec.name + "'", sec.line);
      check_keys(sec, {"vanishing", "slots", "forward", "inverse", "box",
                       "thick", "orient"});
      FaceDecl fd;
      Face& f = fd.face;
      const ScenarioEntry& van = need(sec, "vanishing");
      for (const auto& s : split_list(van.value, ';')) {
        ExprScope sc;
        sc.consts = m.consts;
        double v = parse_const_expr(s, van.line, sc);
        if (v != std::floor(v) || v < 0)
          fail("vanishing indices are non-negative integers", van.line);
        f.S.push_back(int(v));
      }
      if (!std::is_sorted(f.S.begin(), f.S.end()) ||
          std::adjacent_find(f.S.begin(), f.S.end()) != f.S.end())
        fail("vanishing indices must be strictly ascending", van.line);

      f.sys.name = sec.name;
      f.sys.slots = name_list(need(sec, "slots"));
      if (int(f.sys.slots.size()) != m.chart.p)
        fail("a face system needs one slot per even coordinate", sec.line);
      const ScenarioEntry& fwd = need(sec, "forward");
      for (const auto& s : split_list(fwd.value, ';'))
        f.sys.forward.push_back(parse_super_expr(s, fwd.line, scope()));
      if (int(f.sys.forward.size()) != m.chart.p)
        fail("'forward' needs one expression per slot", fwd.line);
      const ScenarioEntry& inv = need(sec, "inverse");
      ExprScope sc;
      sc.evars = f.sys.slots;
      sc.consts = m.consts;
      for (const auto& s : split_list(inv.value, ';'))
        f.sys.inverse.push_back(parse_scalar_expr(s, inv.line, sc));
      if (int(f.sys.inverse.size()) != m.chart.p)
        fail("'inverse' needs one expression per chart variable", inv.line);

      size_t transverse = m.chart.p - f.S.size();
      if (const ScenarioEntry* e = sec.find("box")) f.box = box_list(*e);
      if (f.box.size() != transverse)
        fail("face box needs one 'lo, hi' entry per transverse slot",
             sec.line);
      if (const ScenarioEntry* e = sec.find("thick")) {
        f.thick = cnum(*e);
        if (f.thick <= 0.0) fail("'thick' must be positive", e->line);
      }
      if (const ScenarioEntry* e = sec.find("orient")) fd.orient = cnum(*e);
      m.faces[sec.name] = std::move(fd);
    }
  }

  void build_derivations() {
    for (const auto& sec : file.sections) {
      if (sec.kind != "derivation") continue;
      if (sec.name.empty()) fail("[derivation] needs a name", sec.line);
      if (m.derivations.count(sec.name))
        fail("duplicate derivation '" + sec.name + "'", sec.line);
      check_keys(sec, {"frame", "slot", "coeff", "valid"});
      DerivationDecl d;
      d.frame = sec.find("frame") ? sec.find("frame")->value : "std";
      if (d.frame != "std" && !valid_name(d.frame))
        fail("bad frame name '" + d.frame + "'", sec.find("frame")->line);
      d.slot = need(sec, "slot").value;
      if (const ScenarioEntry* e = sec.find("coeff"))
        d.coeff = parse_super_expr(e->value, e->line, scope());
      else
        d.coeff = m.chart.scalar(ScalarExpr(1.0));
      if (const ScenarioEntry* e = sec.find("valid"))
        d.valid = box_list(*e);
      else
        d.valid = m.chart.region.box;
      if (d.valid.size() != m.chart.region.box.size())
        fail("'valid' needs one 'lo, hi' entry per region parameter",
             sec.line);
      m.derivations[sec.name] = std::move(d);
    }
  }

  template <class T>
  void resolve_names(const std::vector<std::string>& names,
                     const std::map<std::string, T>& table,
                     const std::string& what, int line) const {
    for (const auto& n : names)
      if (!table.count(n))
        fail("scenario references unknown " + what + " '" + n + "'", line);
  }

  void build_blocks() {
    for (const auto& sec : file.sections) {
      if (sec.kind == "cov") {
        check_keys(sec, {"gamma", "gamma-prime", "rho", "faces",
                         "derivations"});
        CovBlockDecl b;
        b.name = sec.name.empty() ? "cov" : sec.name;
        b.gamma = need(sec, "gamma").value;
        b.gamma_prime = need(sec, "gamma-prime").value;
        resolve_names({b.gamma, b.gamma_prime}, m.retractions, "retraction",
                      sec.line);
        const ScenarioEntry& rho = need(sec, "rho");
        ExprScope sc;
        sc.evars = m.chart.evars;
        sc.consts = m.consts;
        for (const auto& s : split_list(rho.value, ';'))
          b.rho.push_back(parse_scalar_expr(s, rho.line, sc));
        b.faces = name_list(need(sec, "faces"));
        resolve_names(b.faces, m.faces, "face", sec.line);
        b.derivations = name_list(need(sec, "derivations"));
        resolve_names(b.derivations, m.derivations, "derivation", sec.line);
        if (b.derivations.size() != b.rho.size())
          fail("one derivation per boundary function is needed", sec.line);
        for (const auto& fn : b.faces)
          for (int s : m.faces.at(fn).face.S)
            if (s >= int(b.rho.size()))
              fail("face '" + fn + "' vanishes along an undeclared boundary "
                   "function", sec.line);
        m.cov_blocks.push_back(std::move(b));
      } else if (sec.kind == "stokes") {
        check_keys(sec, {"kind", "gamma", "gamma-prime", "faces",
                         "derivations", "orient"});
        StokesBlockDecl b;
        b.name = sec.name.empty() ? "stokes" : sec.name;
        const ScenarioEntry& kind = need(sec, "kind");
        if (kind.value == "faces")
          b.general = false;
        else if (kind.value == "general")
          b.general = true;
        else
          fail("stokes kind must be 'faces' or 'general'", kind.line);
        const char* gkey = b.general ? "gamma-prime" : "gamma";
        const char* other = b.general ? "gamma" : "gamma-prime";
        if (sec.find(other))
          fail(std::string("this stokes kind names its retraction '") + gkey +
                   "'", sec.line);
        b.gamma = need(sec, gkey).value;
        resolve_names({b.gamma}, m.retractions, "retraction", sec.line);
        b.faces = name_list(need(sec, "faces"));
        resolve_names(b.faces, m.faces, "face", sec.line);
        if (const ScenarioEntry* e = sec.find("derivations")) {
          if (!b.general)
            fail("only the general kind takes derivations", e->line);
          b.derivations = name_list(*e);
          resolve_names(b.derivations, m.derivations, "derivation", sec.line);
          if (b.derivations.size() != b.faces.size())
            fail("one derivation per boundary piece is needed", e->line);
        }
        if (const ScenarioEntry* e = sec.find("orient")) b.base_orient = cnum(*e);
        m.stokes_blocks.push_back(std::move(b));
      } else if (sec.kind == "limit") {
        if (m.limit) fail("duplicate [limit] section", sec.line);
        check_keys(sec, {"param", "values", "power", "quantity", "target",
                         "target-tolerance"});
        LimitSpec ls;
        ls.line = sec.line;
        ls.param = need(sec, "param").value;
        if (!valid_name(ls.param))
          fail("bad limit parameter name", sec.line);
        const ScenarioEntry& vals = need(sec, "values");
        for (const auto& s : split_list(vals.value, ';')) {
          ExprScope sc;
          sc.consts = m.consts;
          ls.values.push_back(parse_const_expr(s, vals.line, sc));
        }
        if (ls.values.empty())
          fail("limit needs at least one value", vals.line);
        if (const ScenarioEntry* e = sec.find("power")) {
          ls.power = cint(*e);
          if (ls.power < 1) fail("'power' must be at least 1", e->line);
        }
        if (const ScenarioEntry* e = sec.find("quantity")) {
          ls.quantity = e->value;
          if (ls.quantity != "boundary")
            fail("only the 'boundary' quantity extrapolates", e->line);
        }
        if (const ScenarioEntry* e = sec.find("target")) ls.target = e->value;
        if (const ScenarioEntry* e = sec.find("target-tolerance")) {
          ls.target_tol = cnum(*e);
          if (ls.target_tol <= 0.0)
            fail("'target-tolerance' must be positive", e->line);
        }
        m.limit = std::move(ls);
      }
    }
  }

  void check_kinds() const {
    static const std::set<std::string> known{
        "chart",   "const",  "settings",   "convention", "retraction",
        "system",  "morphism", "density",  "face",       "derivation",
        "cov",     "stokes", "limit"};
    for (const auto& sec : file.sections)
      if (!known.count(sec.kind))
        fail("unknown section kind '" + sec.kind + "'", sec.line);
  }

  Model build() {
    check_kinds();
    build_consts();
    build_convention();
    build_settings();
    build_chart();
    build_named();
    build_density();
    build_faces();
    build_derivations();
    build_blocks();
    return std::move(m);
  }
};

}  // namespace

Model build_model(const ScenarioFile& file, const ModelOverrides& over) {
  return Builder(file, over).build();
}

// ---------------------------------------------------------------------------
// Execution.

double extrapolate_to_zero(std::vector<double> h, std::vector<double> y) {
  size_t n = h.size();
  if (n == 0 || y.size() != n)
    throw DimensionError("extrapolation needs matching nonempty node lists");
  for (size_t level = 1; level < n; ++level)
    for (size_t i = 0; i + level < n; ++i) {
      double d = h[i + level] - h[i];
      if (d == 0.0) throw DimensionError("extrapolation nodes must differ");
      y[i] = (h[i + level] * y[i] - h[i] * y[i + 1]) / d;
    }
  return y[0];
}

namespace {

template <class F>
auto with_context(const std::string& ctx, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    throw ScenarioError(ctx + ": " + e.what());
  }
}

struct InstanceRunner {
  const Model& m;
  Rng rng;
  Quadrature quad;
  std::vector<Env> samples;
  std::map<std::string, SystemViewPtr> frames;

  explicit InstanceRunner(const Model& model)
      : m(model), rng(model.seed), quad(model.order) {
    samples = region_samples(m.chart, quad, rng);
  }

  SystemViewPtr frame(const std::string& name) {
    auto it = frames.find(name);
    if (it != frames.end()) return it->second;
    SystemViewPtr v;
    if (name == "std") {
      v = view_for_standard(m.chart, samples);
    } else if (auto f = m.faces.find(name); f != m.faces.end()) {
      auto near = near_face_samples(m.chart, f->second.face, rng);
      v = std::make_shared<SystemView>(m.chart, f->second.face.sys, near);
    } else if (auto s = m.systems.find(name); s != m.systems.end()) {
      v = std::make_shared<SystemView>(m.chart, s->second, samples);
    } else if (auto r = m.retractions.find(name); r != m.retractions.end()) {
      v = view_for_retraction(m.chart, r->second, samples);
    } else {
      throw ScenarioError("unknown frame '" + name + "'");
    }
    frames[name] = v;
    return v;
  }

  DiffOp make_op(const std::string& name) {
    const DerivationDecl& d = m.derivations.at(name);
    SystemViewPtr view = frame(d.frame);
    int idx = -1;
    const auto& slots = view->sys().slots;
    for (size_t k = 0; k < slots.size(); ++k)
      if (slots[k] == d.slot) idx = int(k);
    if (idx < 0)
      for (int j = 0; j < m.chart.q; ++j)
        if (m.chart.onames[j] == d.slot) idx = m.chart.p + j;
    if (idx < 0)
      throw ScenarioError("derivation '" + name + "': frame '" + d.frame +
                          "' has no coordinate '" + d.slot + "'");
    MIdx j(m.chart.p + m.chart.q, 0);
    j[idx] = 1;
    return DiffOp{view, {{j, view->fn_to_system(d.coeff)}}};
  }

  CovOutcome run_cov(const CovBlockDecl& b) {
    const std::string ctx = "block [cov " + b.name + "]";
    return with_context(ctx, [&] {
      if (!m.density)
        throw ScenarioError(
            "a change-of-retraction block needs a 'density' kind density");
      const Retraction& gamma = m.retractions.at(b.gamma);
      const Retraction& gp = m.retractions.at(b.gamma_prime);
      CornerData cd;
      cd.rho = b.rho;
      for (const auto& r : b.rho)
        cd.tau.push_back(compose_scalar(r, m.chart.evars, gamma.images));
      for (const auto& fn : b.faces) cd.faces.push_back(m.faces.at(fn).face);
      for (const auto& dn : b.derivations) {
        cd.D.push_back(make_op(dn));
        cd.dvalid.push_back(m.derivations.at(dn).valid);
      }
      validate_corners(m.chart, cd, quad, rng);
      BoundaryDecomposition bd =
          change_of_vars_corners(*m.density, gamma, gp, cd, quad, rng);
      CovOutcome out;
      out.name = b.name;
      out.gamma = b.gamma;
      out.gamma_prime = b.gamma_prime;
      out.bulk = bd.bulk;
      for (const auto& t : bd.terms)
        out.terms.push_back({b.faces[t.face], t.j, t.value, t.value_base});
      out.boundary = bd.boundary();
      out.total = bd.total();
      out.direct = integrate_berezin(*m.density, gp, quad);
      out.residual = out.direct - out.total;
      out.summands = 1 + int(out.terms.size());
      out.warnings = bd.warnings;
      return out;
    });
  }

  StokesOutcome run_stokes(const StokesBlockDecl& b) {
    const std::string ctx = "block [stokes " + b.name + "]";
    return with_context(ctx, [&] {
      if (!m.form)
        throw ScenarioError(
            "a boundary-identity block needs a 'form' kind density");
      const Retraction& gamma = m.retractions.at(b.gamma);
      StokesOutcome out;
      out.name = b.name;
      out.general = b.general;
      out.gamma = b.gamma;
      out.face_names = b.faces;
      if (!b.general) {
        std::vector<OrientedFace> faces;
        for (const auto& fn : b.faces)
          faces.push_back({m.faces.at(fn).face, m.faces.at(fn).orient});
        StokesReport rep =
            verify_stokes(*m.form, gamma, faces, b.base_orient, quad, rng);
        out.lhs = rep.bulk;
        out.face_vals = rep.face_vals;
        out.boundary = rep.boundary;
        out.sign = rep.sign;
        out.rhs = rep.sign * rep.boundary;
        out.residual = rep.residual;
        out.summands = 1 + int(out.face_vals.size());
      } else {
        std::vector<GeneralBoundary> pieces;
        for (size_t i = 0; i < b.faces.size(); ++i) {
          const FaceDecl& fd = m.faces.at(b.faces[i]);
          DiffOp op = b.derivations.empty()
                          ? leading_slot_op(b.faces[i])
                          : make_op(b.derivations[i]);
          pieces.push_back({fd.face, std::move(op), fd.orient});
        }
        StokesGeneralReport rep =
            stokes_general(*m.form, gamma, pieces, b.base_orient, quad, rng);
        out.lhs = rep.lhs;
        out.face_vals = rep.iota;
        out.corrections = rep.corrections;
        double bsum = 0.0;
        for (double v : rep.iota) bsum += v;
        out.boundary = bsum;
        out.sign = rep.sign;
        out.rhs = rep.rhs;
        out.residual = rep.residual;
        out.summands = 1;
        for (const auto& c : rep.corrections)
          out.summands += 1 + int(c.size());
      }
      return out;
    });
  }

  // transversal derivative along the leading slot of the face's own system
  DiffOp leading_slot_op(const std::string& face_name) {
    SystemViewPtr view = frame(face_name);
    MIdx j(m.chart.p + m.chart.q, 0);
    j[0] = 1;
    return DiffOp{view, {{j, m.chart.scalar(ScalarExpr(1.0))}}};
  }

  InstanceOutcome run(const std::string& mode,
                      const std::map<std::string, double>& binding) {
    for (const auto& [name, r] : m.retractions)
      with_context("retraction '" + name + "'", [&] {
        validate_retraction(m.chart, r, quad, rng);
        return 0;
      });
    InstanceOutcome inst;
    inst.consts = binding;
    if (mode != "stokes")
      for (const auto& b : m.cov_blocks) inst.cov.push_back(run_cov(b));
    if (mode != "cov")
      for (const auto& b : m.stokes_blocks)
        inst.stokes.push_back(run_stokes(b));
    return inst;
  }
};

std::optional<LimitSpec> scan_limit(const ScenarioFile& file) {
  for (const auto& sec : file.sections) {
    if (sec.kind != "limit") continue;
    LimitSpec ls;
    ls.line = sec.line;
    const ScenarioEntry* p = sec.find("param");
    const ScenarioEntry* v = sec.find("values");
    if (!p || !v)
      throw ParseError("[limit] needs 'param' and 'values'", sec.line);
    ls.param = p->value;
    ExprScope sc;
    sc.consts = {{"pi", kPi}};
    for (const auto& s : split_list(v->value, ';'))
      ls.values.push_back(parse_const_expr(s, v->line, sc));
    return ls;
  }
  return std::nullopt;
}

}  // namespace

RunOutcome run_scenario(const ScenarioFile& file, const RunSettings& settings) {
  std::optional<LimitSpec> pre = scan_limit(file);
  std::vector<std::map<std::string, double>> bindings;
  if (pre)
    for (double v : pre->values) bindings.push_back({{pre->param, v}});
  else
    bindings.push_back({});

  RunOutcome out;
  const Model* first = nullptr;
  std::optional<Model> keep;
  for (const auto& binding : bindings) {
    ModelOverrides mo;
    mo.smode = settings.smode;
    mo.order = settings.order;
    mo.tolerance = settings.tolerance;
    mo.consts = binding;
    Model m = build_model(file, mo);
    if (!first) {
      out.conv = m.conv;
      out.order = m.order;
      out.tolerance = m.tolerance;
      out.warnings = m.notes;
      if (settings.mode == "cov" && m.cov_blocks.empty())
        throw ScenarioError(
            "scenario declares no change-of-retraction block");
      if (settings.mode == "stokes" && m.stokes_blocks.empty())
        throw ScenarioError("scenario declares no boundary-identity block");
      if (settings.mode == "run" && m.cov_blocks.empty() &&
          m.stokes_blocks.empty())
        throw ScenarioError("scenario declares no verification block");
    }
    InstanceRunner runner(m);
    out.instances.push_back(runner.run(settings.mode, binding));
    if (!first) {
      keep = std::move(m);
      first = &*keep;
    }
  }

  for (const auto& inst : out.instances) {
    for (const auto& c : inst.cov)
      out.max_residual = std::max(out.max_residual, std::abs(c.residual));
    for (const auto& s : inst.stokes)
      out.max_residual = std::max(out.max_residual, std::abs(s.residual));
  }
  const InstanceOutcome& head = out.instances.front();
  for (const auto& c : head.cov) out.summands += c.summands;
  for (const auto& s : head.stokes) out.summands += s.summands;

  bool limit_ok = true;
  if (first->limit) {
    const LimitSpec& ls = *first->limit;
    if (settings.mode == "stokes")
      throw ScenarioError(
          "limit extrapolation needs a change-of-retraction block");
    LimitOutcome lo;
    lo.param = ls.param;
    lo.values = ls.values;
    std::vector<double> h;
    for (size_t i = 0; i < out.instances.size(); ++i) {
      if (out.instances[i].cov.empty())
        throw ScenarioError(
            "limit extrapolation needs a change-of-retraction block");
      lo.quantities.push_back(out.instances[i].cov.front().boundary);
      h.push_back(std::pow(ls.values[i], ls.power));
    }
    lo.extrapolated = extrapolate_to_zero(h, lo.quantities);
    if (!ls.target.empty()) {
      ExprScope sc;
      sc.consts = first->consts;
      lo.target = parse_const_expr(ls.target, ls.line, sc);
      lo.target_tol = ls.target_tol;
      lo.error = lo.extrapolated - *lo.target;
      lo.pass = std::abs(lo.error) < ls.target_tol;
      limit_ok = lo.pass;
    }
    out.limit = std::move(lo);
  }

  out.pass = out.max_residual < out.tolerance && limit_ok;
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering.

std::string render_report(const RunOutcome& out, const std::string& label,
                          const std::string& mode) {
  using nlohmann::json;
  json root;
  root["scenario"] = label;
  root["mode"] = mode;
  root["convention"] = {
      {"s", out.conv.smode == SMode::Default  ? "default"
            : out.conv.smode == SMode::PqOnly ? "pq-only"
                                              : "half-q"},
      {"b", out.conv.bmode == BMode::PPlusQ ? "p-plus-q" : "zero"}};
  root["quadrature"] = {{"kind", "gauss-legendre"}, {"order", out.order}};
  root["tolerance"] = out.tolerance;

  json instances = json::array();
  for (const auto& inst : out.instances) {
    json ji;
    ji["consts"] = json::object();
    for (const auto& [k, v] : inst.consts) ji["consts"][k] = v;
    json blocks = json::array();
    for (const auto& c : inst.cov) {
      json jb;
      jb["kind"] = "cov";
      jb["name"] = c.name;
      jb["gamma"] = c.gamma;
      jb["gamma_prime"] = c.gamma_prime;
      jb["bulk"] = c.bulk;
      json terms = json::array();
      for (const auto& t : c.terms)
        terms.push_back({{"face", t.face},
                         {"index", t.index},
                         {"value", t.value},
                         {"value_base", t.value_base}});
      jb["terms"] = std::move(terms);
      // boundary is the ordered sum of the term values, total is
      // bulk + boundary; a reader re-adding the printed terms reproduces
      // both bit for bit
      jb["boundary"] = c.boundary;
      jb["total"] = c.total;
      jb["direct"] = c.direct;
      jb["residual"] = c.residual;
      jb["summands"] = c.summands;
      jb["warnings"] = c.warnings;
      blocks.push_back(std::move(jb));
    }
    for (const auto& s : inst.stokes) {
      json jb;
      jb["kind"] = "stokes";
      jb["variant"] = s.general ? "general" : "faces";
      jb["name"] = s.name;
      jb["gamma"] = s.gamma;
      jb["lhs"] = s.lhs;
      json faces = json::array();
      for (size_t i = 0; i < s.face_vals.size(); ++i) {
        json jf;
        jf["name"] = i < s.face_names.size() ? s.face_names[i] : "";
        jf["value"] = s.face_vals[i];
        if (s.general) jf["corrections"] = s.corrections[i];
        faces.push_back(std::move(jf));
      }
      jb["faces"] = std::move(faces);
      jb["boundary"] = s.boundary;
      jb["sign"] = s.sign;
      jb["rhs"] = s.rhs;
      jb["residual"] = s.residual;
      jb["summands"] = s.summands;
      blocks.push_back(std::move(jb));
    }
    ji["blocks"] = std::move(blocks);
    instances.push_back(std::move(ji));
  }
  root["instances"] = std::move(instances);

  if (out.limit) {
    const LimitOutcome& lo = *out.limit;
    json jl;
    jl["param"] = lo.param;
    jl["values"] = lo.values;
    jl["quantities"] = lo.quantities;
    jl["extrapolated"] = lo.extrapolated;
    if (lo.target) {
      jl["target"] = *lo.target;
      jl["target_tolerance"] = lo.target_tol;
      jl["error"] = lo.error;
      jl["pass"] = lo.pass;
    }
    root["limit"] = std::move(jl);
  }

  root["warnings"] = out.warnings;
  root["max_residual"] = out.max_residual;
  root["summands"] = out.summands;
  root["status"] = out.pass ? "pass" : "fail";
  return root.dump(2) + "\n";
}

}  // namespace berez
