#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "parfom/async_scheme.hpp"
#include "parfom/methods.hpp"
#include "parfom/problems.hpp"

namespace parfom::harness {

enum class SchemeKind { sync_lockstep, sync_sequential, async };
std::string to_string(SchemeKind scheme);

struct ProblemSpec {
  std::string kind;  // norm_power | piecewise_max | least_squares
  int dimension = 1;
  // norm_power
  double mu = 1.0;
  double d = 1.0;
  std::optional<std::vector<double>> center;  // default: origin
  std::string domain = "all";                 // all | ball | box
  double domain_radius = 0.0;                 // ball radius / box half-width about the center
  // piecewise_max
  int pieces = 0;
  // least_squares
  int rows = 0;
  int rank = 0;
  double condition = 10.0;
  std::uint64_t seed = 0;
  // starting point: explicit, or at a given optimality gap along a seeded direction
  std::optional<std::vector<double>> x0;
  std::optional<double> x0_gap;
};

struct MethodSpec {
  MethodTag tag = MethodTag::subgrad;
  std::optional<double> L;     // accel; default from metadata
  std::optional<double> L0;    // univ; explicit value
  bool L0_max_admissible = false;  // univ: largest L0 admissible for every copy
};

struct ExperimentConfig {
  ProblemSpec problem;
  MethodSpec method;
  SchemeKind scheme = SchemeKind::sync_lockstep;
  std::vector<double> eps;
  std::optional<int> N;  // nullopt: default_N(eps)
  std::optional<DelayModel> delay;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::int64_t> budget;
  std::string output_dir = "parfom_out";
  bool write_traces = true;
  bool threaded = false;
};

/// Validates and fills defaults. Throws ConfigurationError naming the offending path.
ExperimentConfig parse_config(const nlohmann::json& document);
ExperimentConfig parse_config_file(const std::string& path);

/// The problem instance and starting point of one grid cell.
struct CellSetup {
  ProblemInstance problem;
  Point x0;
  MethodKind method;
};

CellSetup build_cell(const ExperimentConfig& config, double eps, int N, std::uint64_t seed);
int resolve_N(const ExperimentConfig& config, double eps);

} // namespace parfom::harness
