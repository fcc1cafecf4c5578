#include "parfom/harness/grid.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parfom/async_scheme.hpp"
#include "parfom/errors.hpp"
#include "parfom/harness/fit.hpp"
#include "parfom/sync_scheme.hpp"

namespace parfom::harness {

namespace {

using nlohmann::json;

struct Bounds {
  std::optional<BoundReport> theorem;
  std::optional<BoundReport> corollary;
};

BoundReport scaled(BoundReport r, double factor, const std::string& prefix) {
  r.which = prefix + r.which;
  r.total = 0.0;
  for (auto& t : r.terms) {
    t.value *= factor;
    r.total += t.value;
  }
  return r;
}

Bounds evaluate_bounds(const ExperimentConfig& config, const CellSetup& setup, double f_x0, double eps, int N) {
  Bounds b;
  if (!setup.problem.metadata() || !setup.problem.metadata()->f_star) return b;
  GrowthMetadata meta = *setup.problem.metadata();
  if (setup.problem.optimal_set()) meta.dist_x0_to_opt = distance_to_opt(setup.problem, setup.x0);
  const MethodKind& kind = setup.method;

  auto attempt = [](auto&& fn) -> std::optional<BoundReport> {
    try {
      return fn();
    } catch (const UnsupportedQuery&) {
      return std::nullopt;
    } catch (const ParameterError&) {
      return std::nullopt;
    }
  };

  if (config.scheme == SchemeKind::async) {
    const DelayModel& d = *config.delay;
    const double tau_t = d.effective_tau_transit(N);
    b.theorem = attempt([&] {
      BoundReport r = bound_async_theorem(meta, f_x0, eps, N, tau_t, d.tau_pause, time_bound(meta, kind));
      if (kind.tag == MethodTag::univ) {
        for (int n = -1; n <= N; ++n) {
          if (!l0_admissible(kind.L0, *meta.holder_exponent, *meta.holder_constant, std::ldexp(eps, n))) {
            r.assumptions_ok = false;
            r.note = "L0 exceeds the admissible limit for some copy";
          }
        }
      }
      return r;
    });
    if (kind.tag == MethodTag::univ) {
      b.corollary = attempt([&] { return bound_cor_univ(meta, f_x0, eps, N, tau_t, d.tau_pause, kind.L0); });
    }
    return b;
  }

  b.theorem = attempt([&] { return bound_sync_theorem(meta, f_x0, eps, N, iteration_bound(meta, kind)); });
  if (kind.tag == MethodTag::subgrad) {
    b.corollary = attempt([&] { return bound_cor_subgrad(meta, f_x0, eps, N); });
  } else if (kind.tag == MethodTag::accel) {
    b.corollary = attempt([&] { return bound_cor_accel(meta, f_x0, eps, N); });
  }
  if (config.scheme == SchemeKind::sync_sequential) {
    // A sweep of the N + 2 copies replaces one period.
    if (b.theorem) b.theorem = scaled(*b.theorem, N + 2.0, "sequential-");
    if (b.corollary) b.corollary = scaled(*b.corollary, N + 2.0, "sequential-");
  }
  return b;
}

std::optional<double> suggested_exponent(const CellSetup& setup) {
  const auto& m = setup.problem.metadata();
  if (!m) return std::nullopt;
  try {
    return rate_exponent(setup.method.tag, m->d, m->holder_exponent.value_or(1.0));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::optional<double> parse_optional_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

} // namespace

std::string cell_key(const ExperimentConfig& config, std::size_t eps_index, std::uint64_t seed) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s-%s-eps%02zu-seed%llu", to_string(config.scheme).c_str(),
                to_string(config.method.tag).c_str(), eps_index, static_cast<unsigned long long>(seed));
  return buf;
}

CellResult run_cell(const ExperimentConfig& config, double eps, std::uint64_t seed) {
  const int N = resolve_N(config, eps);
  const CellSetup setup = build_cell(config, eps, N, seed);
  const double f_x0 = evaluate(setup.problem, project(setup.problem, setup.x0)).value;
  const Bounds bounds = evaluate_bounds(config, setup, f_x0, eps, N);

  double budget = 1e6;
  if (config.budget) {
    budget = static_cast<double>(*config.budget);
  } else if (bounds.theorem) {
    budget = std::ceil(2.0 * bounds.theorem->total) + 100.0;
  }

  CellResult result;
  if (config.scheme == SchemeKind::async) {
    DelayModel delays = *config.delay;
    delays.seed = delays.seed + seed;
    AsyncOptions opts;
    opts.budget = budget;
    result.trace = run_async(setup.problem, setup.method, setup.x0, eps, N, delays, opts);
  } else {
    SyncOptions opts;
    opts.mode = config.scheme == SchemeKind::sync_sequential ? SyncMode::sequential : SyncMode::lockstep;
    opts.budget = static_cast<std::int64_t>(budget);
    opts.threaded = config.threaded;
    result.trace = run_sync(setup.problem, setup.method, setup.x0, eps, N, opts);
  }

  const SchemeTrace& trace = result.trace;
  RunSummary& s = result.summary;
  s.eps = eps;
  s.N = N;
  s.scheme = to_string(config.scheme);
  s.method = to_string(config.method.tag);
  s.seed = seed;
  s.time_to_eps = trace.time_to_eps;
  s.oracle_calls_total = trace.oracle_calls_total;
  s.restarts_per_copy = trace.restarts_per_copy();
  s.complete = trace.complete;
  if (trace.f_star) {
    s.gap = trace.f_x0 - *trace.f_star;
    s.n_bar = n_bar(s.gap, eps);
  }
  const InvariantReport inv = check_invariants(trace);
  s.invariants_ok = inv.ok;
  s.invariant_violations = inv.violations;
  s.theorem_report = bounds.theorem;
  s.corollary_report = bounds.corollary;
  if (bounds.theorem) s.bound_theorem = bounds.theorem->total;
  if (bounds.corollary) s.bound_corollary = bounds.corollary->total;
  if (bounds.theorem) {
    if (trace.time_to_eps) {
      s.compliant = *trace.time_to_eps <= bounds.theorem->total;
    } else if (trace.end_time > bounds.theorem->total) {
      s.compliant = false;  // ran past the bound without reaching eps
    }
  }
  s.fit_exponent = suggested_exponent(setup);
  return result;
}

std::vector<RunSummary> run_grid(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  std::vector<RunSummary> out;
  const bool write = !config.output_dir.empty();
  if (write) fs::create_directories(fs::path(config.output_dir) / "traces");

  for (std::size_t i = 0; i < config.eps.size(); ++i) {
    for (const std::uint64_t seed : config.seeds) {
      RunSummary s;
      try {
        CellResult cell = run_cell(config, config.eps[i], seed);
        s = std::move(cell.summary);
        if (write && config.write_traces) {
          const fs::path file = fs::path(config.output_dir) / "traces" / (cell_key(config, i, seed) + ".jsonl");
          std::ofstream f(file, std::ios::binary);
          if (!f) throw std::runtime_error("cannot write " + file.string());
          json extra;
          extra["scheme"] = s.scheme;
          extra["method"] = s.method;
          extra["seed"] = seed;
          if (config.delay) extra["delay"] = config.delay->to_json();
          write_trace_jsonl(cell.trace, f, extra);
          if (!f) throw std::runtime_error("failed writing " + file.string());
          s.trace_file = file.string();
        }
      } catch (const ConfigurationError&) {
        throw;
      } catch (const std::exception& e) {
        s.eps = config.eps[i];
        s.seed = seed;
        s.scheme = to_string(config.scheme);
        s.method = to_string(config.method.tag);
        s.error = e.what();
      }
      out.push_back(std::move(s));
    }
  }

  if (write) {
    std::ofstream csv(fs::path(config.output_dir) / "summary.csv", std::ios::binary);
    write_csv(out, csv);
    std::ofstream jl(fs::path(config.output_dir) / "summary.jsonl", std::ios::binary);
    write_jsonl(out, jl);
  }
  return out;
}

json to_json(const BoundReport& r) {
  json j;
  j["which"] = r.which;
  j["n_bar"] = r.n_bar;
  j["total"] = r.total;
  j["regime"] = to_string(r.regime);
  j["assumptions_ok"] = r.assumptions_ok;
  if (!r.note.empty()) j["note"] = r.note;
  j["terms"] = json::array();
  for (const auto& t : r.terms) j["terms"].push_back({{"label", t.label}, {"value", t.value}});
  return j;
}

namespace {

BoundReport report_from_json(const json& j) {
  BoundReport r;
  r.which = j.at("which").get<std::string>();
  r.n_bar = j.at("n_bar").get<int>();
  r.regime = j.at("regime").get<std::string>() == "add-on" ? BoundRegime::add_on : BoundRegime::below_threshold;
  r.assumptions_ok = j.at("assumptions_ok").get<bool>();
  if (j.contains("note")) r.note = j["note"].get<std::string>();
  for (const auto& t : j.at("terms")) r.add(t.at("label").get<std::string>(), t.at("value").get<double>());
  return r;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_get(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

} // namespace

json to_json(const RunSummary& s) {
  json j;
  j["eps"] = s.eps;
  j["N"] = s.N;
  j["n_bar"] = s.n_bar;
  j["scheme"] = s.scheme;
  j["method"] = s.method;
  j["seed"] = s.seed;
  j["time_to_eps"] = opt(s.time_to_eps);
  j["oracle_calls_total"] = s.oracle_calls_total;
  j["restarts_per_copy"] = s.restarts_per_copy;
  j["bound_theorem"] = opt(s.bound_theorem);
  j["bound_corollary"] = opt(s.bound_corollary);
  j["compliant"] = opt(s.compliant);
  j["complete"] = s.complete;
  j["invariants_ok"] = s.invariants_ok;
  j["invariant_violations"] = s.invariant_violations;
  j["theorem_report"] = s.theorem_report ? to_json(*s.theorem_report) : json(nullptr);
  j["corollary_report"] = s.corollary_report ? to_json(*s.corollary_report) : json(nullptr);
  j["gap"] = s.gap;
  j["fit_exponent"] = opt(s.fit_exponent);
  j["trace_file"] = s.trace_file;
  j["error"] = s.error;
  return j;
}

RunSummary summary_from_json(const json& j) {
  RunSummary s;
  s.eps = j.at("eps").get<double>();
  s.N = j.at("N").get<int>();
  s.n_bar = j.at("n_bar").get<int>();
  s.scheme = j.at("scheme").get<std::string>();
  s.method = j.at("method").get<std::string>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.time_to_eps = opt_get<double>(j, "time_to_eps");
  s.oracle_calls_total = j.at("oracle_calls_total").get<std::int64_t>();
  s.restarts_per_copy = j.value("restarts_per_copy", std::vector<int>{});
  s.bound_theorem = opt_get<double>(j, "bound_theorem");
  s.bound_corollary = opt_get<double>(j, "bound_corollary");
  s.compliant = opt_get<bool>(j, "compliant");
  s.complete = j.value("complete", false);
  s.invariants_ok = j.value("invariants_ok", true);
  s.invariant_violations = j.value("invariant_violations", std::vector<std::string>{});
  if (j.contains("theorem_report") && !j["theorem_report"].is_null()) s.theorem_report = report_from_json(j["theorem_report"]);
  if (j.contains("corollary_report") && !j["corollary_report"].is_null())
    s.corollary_report = report_from_json(j["corollary_report"]);
  s.gap = j.value("gap", 0.0);
  s.fit_exponent = opt_get<double>(j, "fit_exponent");
  s.trace_file = j.value("trace_file", std::string{});
  s.error = j.value("error", std::string{});
  return s;
}

void write_csv(const std::vector<RunSummary>& summaries, std::ostream& out) {
  out << "eps,N,n_bar,scheme,method,time_to_eps,oracle_calls_total,bound_theorem,bound_corollary,compliant\n";
  auto opt_num = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& s : summaries) {
    out << format_double(s.eps) << ',' << s.N << ',' << s.n_bar << ',' << s.scheme << ',' << s.method << ','
        << opt_num(s.time_to_eps) << ',' << s.oracle_calls_total << ',' << opt_num(s.bound_theorem) << ','
        << opt_num(s.bound_corollary) << ',' << (s.compliant ? (*s.compliant ? "true" : "false") : "") << '\n';
  }
}

std::vector<RunSummary> read_csv(std::istream& in) {
  std::vector<RunSummary> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (line != "eps,N,n_bar,scheme,method,time_to_eps,oracle_calls_total,bound_theorem,bound_corollary,compliant")
    throw InputError("read_csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 10) throw InputError("read_csv: expected 10 fields in '" + line + "'");
    RunSummary s;
    s.eps = std::stod(f[0]);
    s.N = std::stoi(f[1]);
    s.n_bar = std::stoi(f[2]);
    s.scheme = f[3];
    s.method = f[4];
    s.time_to_eps = parse_optional_double(f[5]);
    s.oracle_calls_total = std::stoll(f[6]);
    s.bound_theorem = parse_optional_double(f[7]);
    s.bound_corollary = parse_optional_double(f[8]);
    if (f[9] == "true") s.compliant = true;
    else if (f[9] == "false") s.compliant = false;
    else if (!f[9].empty()) throw InputError("read_csv: bad compliant field '" + f[9] + "'");
    out.push_back(std::move(s));
  }
  return out;
}

void write_jsonl(const std::vector<RunSummary>& summaries, std::ostream& out) {
  for (const auto& s : summaries) out << to_json(s).dump() << '\n';
}

std::vector<RunSummary> read_jsonl(std::istream& in) {
  std::vector<RunSummary> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(summary_from_json(json::parse(line)));
  }
  return out;
}

} // namespace parfom::harness
