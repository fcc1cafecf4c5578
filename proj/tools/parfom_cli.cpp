// Command-line front end: run, grid, verify, fit, trace-dump.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "parfom/errors.hpp"
#include "parfom/harness/config.hpp"
#include "parfom/harness/fit.hpp"
#include "parfom/harness/grid.hpp"
#include "parfom/harness/verify.hpp"

namespace fs = std::filesystem;
using namespace parfom;
using namespace parfom::harness;

namespace {

constexpr const char* kOutEnv = "PARFOM_OUT";

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> budget;
  std::string model = "log";
  double exponent = 0.0;
};

ExperimentConfig load(const Flags& flags) {
  ExperimentConfig c = parse_config_file(flags.config);
  if (const char* env = std::getenv(kOutEnv); env && *env) c.output_dir = env;
  if (!flags.out.empty()) c.output_dir = flags.out;
  if (flags.seed) c.seeds = {*flags.seed};
  if (flags.budget) {
    if (*flags.budget <= 0) throw ConfigurationError("--budget: must be positive");
    c.budget = *flags.budget;
  }
  return c;
}

std::string out_dir(const Flags& flags) {
  if (!flags.out.empty()) return flags.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return "parfom_out";
}

std::vector<RunSummary> load_summaries(const std::string& dir) {
  const fs::path path = fs::path(dir) / "summary.jsonl";
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read " + path.string() + " (run `grid` first)");
  return read_jsonl(in);
}

int print_verdicts(const std::vector<RunSummary>& summaries) {
  const VerifyReport rep = verify_bounds(summaries);
  for (const auto& c : rep.cells) {
    std::cout << to_string(c.status) << " eps=" << c.eps << " seed=" << c.seed << "  " << c.detail << '\n';
  }
  std::cout << rep.passed << " pass, " << rep.failed << " fail, " << rep.unverifiable << " unverifiable\n";
  return rep.exit_code();
}

int cmd_run(const Flags& flags) {
  ExperimentConfig c = load(flags);
  CellResult cell = run_cell(c, c.eps.front(), c.seeds.front());
  std::cout << to_json(cell.summary).dump(2) << '\n';
  return print_verdicts({cell.summary});
}

int cmd_grid(const Flags& flags) {
  ExperimentConfig c = load(flags);
  const auto summaries = run_grid(c);
  std::cout << "wrote " << summaries.size() << " cells to " << c.output_dir << '\n';
  return print_verdicts(summaries);
}

int cmd_verify(const Flags& flags) { return print_verdicts(load_summaries(out_dir(flags))); }

int cmd_fit(const Flags& flags) {
  const auto summaries = load_summaries(out_dir(flags));
  RateModel model = RateModel::log;
  double p = flags.exponent;
  if (flags.model == "power") {
    model = RateModel::power;
    if (!(p > 0.0)) {
      for (const auto& s : summaries) {
        if (s.fit_exponent) p = *s.fit_exponent;
      }
    }
  } else if (flags.model != "log") {
    throw ConfigurationError("--model: must be log or power");
  }
  const FitResult fit = fit_rate(summaries, model, p);
  std::cout << "model=" << flags.model;
  if (model == RateModel::power) std::cout << " p=" << fit.exponent;
  std::cout << " slope=" << fit.slope << " intercept=" << fit.intercept << " r2=" << fit.r_squared
            << " points=" << fit.points << '\n';
  return 0;
}

int cmd_trace_dump(const Flags& flags) {
  ExperimentConfig c = load(flags);
  CellResult cell = run_cell(c, c.eps.front(), c.seeds.front());
  nlohmann::json extra;
  extra["scheme"] = cell.summary.scheme;
  extra["method"] = cell.summary.method;
  extra["seed"] = cell.summary.seed;
  if (c.delay) extra["delay"] = c.delay->to_json();
  write_trace_jsonl(cell.trace, std::cout, extra);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel restart scheme benchmark harness"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "experiment config (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory (overrides $PARFOM_OUT and the config)");
    sub->add_option("--seed", flags.seed, "run only this seed");
    sub->add_option("--budget", flags.budget, "time budget per cell");
  };

  auto* run = app.add_subcommand("run", "run the first cell of a config and print its summary");
  add_common(run, true);
  auto* grid = app.add_subcommand("grid", "run every (eps, seed) cell; write CSV, JSONL and traces");
  add_common(grid, true);
  auto* verify = app.add_subcommand("verify", "check stored summaries against their bounds");
  add_common(verify, false);
  auto* fit = app.add_subcommand("fit", "fit time-to-eps against log(1/eps) or eps^-p");
  add_common(fit, false);
  fit->add_option("--model", flags.model, "log or power")->check(CLI::IsMember({"log", "power"}));
  fit->add_option("--exponent", flags.exponent, "p for the power model (default: from metadata)");
  auto* dump = app.add_subcommand("trace-dump", "print the JSONL trace of the first cell");
  add_common(dump, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(flags);
    if (grid->parsed()) return cmd_grid(flags);
    if (verify->parsed()) return cmd_verify(flags);
    if (fit->parsed()) return cmd_fit(flags);
    if (dump->parsed()) return cmd_trace_dump(flags);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
