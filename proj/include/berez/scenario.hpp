// Declarative scenario files: line-oriented sections of key = value entries,
// an infix expression grammar over the chart coordinates, resolution into
// engine objects, execution of the declared verifications, and deterministic
// structured reports.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "berez/corners.hpp"
#include "berez/stokes.hpp"

namespace berez {

// ---------------------------------------------------------------------------
// Raw file structure.  A section starts with "[kind]" or "[kind name]"; every
// following "key = value" line belongs to it.  '#' starts a comment.

struct ScenarioEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ScenarioSection {
  std::string kind;
  std::string name;
  int line = 0;
  std::vector<ScenarioEntry> entries;

  const ScenarioEntry* find(const std::string& key) const;
};

struct ScenarioFile {
  std::vector<ScenarioSection> sections;
};

// ParseError carries the offending line number
ScenarioFile parse_scenario_text(const std::string& text);
// canonical text; parse(render(parse(t))) has the same structure as parse(t)
std::string render_scenario(const ScenarioFile& file);
bool same_structure(const ScenarioFile& a, const ScenarioFile& b);

// ---------------------------------------------------------------------------
// Expression grammar: infix + - * /, '^' with an integer or '(a/b)' rational
// exponent, unary minus, parentheses, numeric literals, named constants, the
// functions sin cos exp log sqrt atan2 bump bumps, the declared even and odd
// variables, and pull(name, e) applying a named retraction or morphism.

struct ExprScope {
  int q = 0;
  std::vector<std::string> evars;
  std::vector<std::string> onames;
  std::map<std::string, double> consts;
  // named substitutions usable through pull(); keyed by name
  const std::map<std::string, std::vector<SuperNumber>>* pulls = nullptr;
  std::vector<std::string> pull_evars;  // formal variables of the pull images
};

SuperNumber parse_super_expr(const std::string& text, int line,
                             const ExprScope& scope);
ScalarExpr parse_scalar_expr(const std::string& text, int line,
                             const ExprScope& scope);
double parse_const_expr(const std::string& text, int line,
                        const ExprScope& scope);

// ---------------------------------------------------------------------------
// Resolved model.

struct FaceDecl {
  Face face;
  double orient = 0.0;  // 0 = derive from the parametrization
};

struct DerivationDecl {
  std::string frame;  // "std", or the name of a face / system / retraction
  std::string slot;
  SuperNumber coeff{0};  // over standard coordinates; 1 when omitted
  std::vector<std::array<double, 2>> valid;
};

struct CovBlockDecl {
  std::string name;
  std::string gamma, gamma_prime;
  std::vector<ScalarExpr> rho;
  std::vector<std::string> faces;
  std::vector<std::string> derivations;
};

struct StokesBlockDecl {
  std::string name;
  bool general = false;
  std::string gamma;  // bulk retraction (gamma-prime for the general kind)
  std::vector<std::string> faces;
  std::vector<std::string> derivations;  // general kind; empty = leading slots
  double base_orient = 1.0;
};

struct LimitSpec {
  std::string param;
  std::vector<double> values;
  int power = 2;  // extrapolation runs in param^power
  std::string quantity = "boundary";
  std::string target;  // constant expression; empty = no check
  double target_tol = 1e-4;
  int line = 0;
};

struct Model {
  Chart chart;
  Convention conv;
  int order = 32;
  double tolerance = 1e-8;
  uint64_t seed = 12345;
  std::map<std::string, double> consts;
  std::map<std::string, Retraction> retractions;
  std::map<std::string, AdaptedSystem> systems;
  std::map<std::string, std::vector<SuperNumber>> morphisms;  // evens then odds
  std::map<std::string, FaceDecl> faces;
  std::map<std::string, DerivationDecl> derivations;
  std::optional<BerezinDensity> density;
  std::optional<IntegralForm> form;
  std::vector<CovBlockDecl> cov_blocks;
  std::vector<StokesBlockDecl> stokes_blocks;
  std::optional<LimitSpec> limit;
  std::vector<std::string> notes;  // non-fatal advisories
};

struct ModelOverrides {
  std::optional<SMode> smode;
  std::optional<int> order;
  std::optional<double> tolerance;
  std::map<std::string, double> consts;  // limit parameter binding
};

// ScenarioError on unresolved names or inconsistent declarations
Model build_model(const ScenarioFile& file, const ModelOverrides& over = {});

// ---------------------------------------------------------------------------
// Execution.

struct CovOutcome {
  std::string name;
  std::string gamma, gamma_prime;
  double bulk = 0.0;
  struct Term {
    std::string face;
    MIdx index;
    double value = 0.0;
    double value_base = 0.0;
  };
  std::vector<Term> terms;
  double boundary = 0.0;  // sum of term values in listed order
  double total = 0.0;     // bulk + boundary
  double direct = 0.0;    // integral against gamma_prime
  double residual = 0.0;  // direct - total
  int summands = 0;       // 1 + terms
  std::vector<std::string> warnings;
};

struct StokesOutcome {
  std::string name;
  bool general = false;
  std::string gamma;
  double lhs = 0.0;  // bulk integral of the differential
  std::vector<std::string> face_names;
  std::vector<double> face_vals;  // oriented face integrals
  std::vector<std::vector<double>> corrections;  // general kind only
  double boundary = 0.0;
  double sign = 1.0;
  double rhs = 0.0;
  double residual = 0.0;
  int summands = 0;
};

struct InstanceOutcome {
  std::map<std::string, double> consts;  // limit binding; empty otherwise
  std::vector<CovOutcome> cov;
  std::vector<StokesOutcome> stokes;
};

struct LimitOutcome {
  std::string param;
  std::vector<double> values;
  std::vector<double> quantities;
  double extrapolated = 0.0;
  std::optional<double> target;
  double target_tol = 0.0;
  double error = 0.0;
  bool pass = true;
};

struct RunOutcome {
  Convention conv;
  int order = 32;
  double tolerance = 1e-8;
  std::vector<InstanceOutcome> instances;
  std::optional<LimitOutcome> limit;
  std::vector<std::string> warnings;
  double max_residual = 0.0;
  int summands = 0;
  bool pass = true;
};

struct RunSettings {
  // "run" executes every declared block, "cov" / "stokes" only that family
  std::string mode = "run";
  std::optional<SMode> smode;
  std::optional<int> order;
  std::optional<double> tolerance;
};

RunOutcome run_scenario(const ScenarioFile& file, const RunSettings& settings);

// polynomial extrapolation of (h_i, y_i) to h = 0, h_i pairwise distinct
double extrapolate_to_zero(std::vector<double> h, std::vector<double> y);

// deterministic structured report; label names the scenario in the output
std::string render_report(const RunOutcome& out, const std::string& label,
                          const std::string& mode);

}  // namespace berez
