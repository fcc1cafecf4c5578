#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parfom/bounds.hpp"
#include "parfom/harness/config.hpp"
#include "parfom/trace.hpp"

namespace parfom::harness {

struct RunSummary {
  double eps = 0.0;
  int N = -1;
  int n_bar = -1;
  std::string scheme;
  std::string method;
  std::uint64_t seed = 0;
  std::optional<double> time_to_eps;
  std::int64_t oracle_calls_total = 0;
  std::vector<int> restarts_per_copy;
  std::optional<double> bound_theorem;
  std::optional<double> bound_corollary;
  std::optional<bool> compliant;  // nullopt: unverifiable
  bool complete = false;
  bool invariants_ok = true;
  std::vector<std::string> invariant_violations;
  std::optional<BoundReport> theorem_report;
  std::optional<BoundReport> corollary_report;
  double gap = 0.0;
  std::optional<double> fit_exponent;  // power-law exponent suggested by the metadata
  std::string trace_file;
  std::string error;  // per-cell failure, grid continues
};

struct CellResult {
  RunSummary summary;
  SchemeTrace trace;
};

/// Runs one cell; bounds are evaluated from the instance metadata.
CellResult run_cell(const ExperimentConfig& config, double eps, std::uint64_t seed);

/// Every (eps, seed) cell. Writes summary.csv, summary.jsonl and traces/ when
/// config.output_dir is non-empty.
std::vector<RunSummary> run_grid(const ExperimentConfig& config);

std::string cell_key(const ExperimentConfig& config, std::size_t eps_index, std::uint64_t seed);

nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const RunSummary& summary);
RunSummary summary_from_json(const nlohmann::json& j);

void write_csv(const std::vector<RunSummary>& summaries, std::ostream& out);
std::vector<RunSummary> read_csv(std::istream& in);
void write_jsonl(const std::vector<RunSummary>& summaries, std::ostream& out);
std::vector<RunSummary> read_jsonl(std::istream& in);

} // namespace parfom::harness
