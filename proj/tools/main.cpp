// Command line driver: runs declarative scenarios, prints a structured
// report, and exits 0 only when every residual beats the tolerance.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "berez/builtins.hpp"
#include "berez/errors.hpp"
#include "berez/scenario.hpp"

namespace {

struct Options {
  std::string example;
  std::string path;
  std::string convention;
  int order = 0;
  double tolerance = 0.0;
  std::string report;
  bool count_terms = false;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--example", opt.example,
                  "name of a built-in scenario (see list-examples)");
  cmd->add_option("--scenario", opt.path, "path to a scenario file");
  cmd->add_option("--convention", opt.convention,
                  "fibre sign convention: default | pq-only | half-q");
  cmd->add_option("--quad-order", opt.order,
                  "Gauss-Legendre order per axis")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tolerance", opt.tolerance, "residual tolerance")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--report", opt.report, "also write the report to a file");
  cmd->add_flag("--count-terms", opt.count_terms,
                "print only the number of structural summands");
}

int run_mode(const Options& opt, const std::string& mode) {
  std::string label, text;
  if (opt.example.empty() == opt.path.empty()) {
    std::cerr << "error: give exactly one of --example or --scenario\n";
    return 2;
  }
  if (!opt.example.empty()) {
    const berez::BuiltinExample* ex = berez::find_example(opt.example);
    if (!ex) {
      std::cerr << "error: no built-in example named '" << opt.example
                << "'\n";
      return 2;
    }
    label = ex->name;
    text = ex->text;
  } else {
    std::ifstream in(opt.path);
    if (!in) {
      std::cerr << "error: cannot read scenario file '" << opt.path << "'\n";
      return 2;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    label = opt.path;
    text = buf.str();
  }

  berez::RunSettings settings;
  settings.mode = mode;
  if (!opt.convention.empty()) {
    std::string name = opt.convention;
    if (name.rfind("s=", 0) == 0) name = name.substr(2);
    settings.smode = berez::Convention::parse(name).smode;
  }
  if (opt.order > 0) settings.order = opt.order;
  if (opt.tolerance > 0.0) settings.tolerance = opt.tolerance;

  berez::ScenarioFile file = berez::parse_scenario_text(text);
  berez::RunOutcome out = berez::run_scenario(file, settings);

  if (opt.count_terms) {
    std::cout << out.summands << "\n";
  } else {
    std::string report = berez::render_report(out, label, mode);
    std::cout << report;
    if (!opt.report.empty()) {
      std::ofstream rf(opt.report);
      if (!rf) {
        std::cerr << "error: cannot write report file '" << opt.report
                  << "'\n";
        return 2;
      }
      rf << report;
    }
  }
  return out.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Berezin integrals on superdomains with corners"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* run = app.add_subcommand(
      "run", "run every verification block of a scenario");
  CLI::App* cov = app.add_subcommand(
      "verify-cov", "run only the change-of-retraction blocks");
  CLI::App* stokes = app.add_subcommand(
      "verify-stokes", "run only the boundary-identity blocks");
  CLI::App* list = app.add_subcommand(
      "list-examples", "list the built-in scenarios");
  add_common(run, opt);
  add_common(cov, opt);
  add_common(stokes, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      for (const auto& ex : berez::builtin_examples())
        std::cout << ex.name << "  " << ex.title << "\n";
      return 0;
    }
    std::string mode = run->parsed() ? "run" : cov->parsed() ? "cov"
                                                             : "stokes";
    return run_mode(opt, mode);
  } catch (const berez::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const berez::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
