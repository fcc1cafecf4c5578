#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "parfom/errors.hpp"
#include "parfom/harness/config.hpp"
#include "parfom/harness/fit.hpp"
#include "parfom/harness/grid.hpp"
#include "parfom/harness/verify.hpp"

using namespace parfom;
using namespace parfom::harness;
using nlohmann::json;

namespace {

json base_config() {
  return json::parse(R"({
    "problem": {"kind": "norm_power", "dimension": 1, "mu": 1, "d": 1, "x0": [3]},
    "method": "subgrad",
    "scheme": "sync-lockstep",
    "eps": [0.5, 0.25, 0.125, 0.0625],
    "output": {"dir": ""}
  })");
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigurationError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

} // namespace

TEST_CASE("config defaults") {
  const auto c = parse_config(base_config());
  CHECK(c.scheme == SchemeKind::sync_lockstep);
  CHECK(c.method.tag == MethodTag::subgrad);
  CHECK_FALSE(c.N);
  CHECK(resolve_N(c, 0.0625) == default_N(0.0625));
  CHECK(c.seeds == std::vector<std::uint64_t>{0});
  CHECK_FALSE(c.budget);
  CHECK_FALSE(c.threaded);
  CHECK(c.write_traces);
}

TEST_CASE("config errors name the offending path") {
  auto doc = base_config();
  doc["problem"]["colour"] = 1;
  CHECK(config_error(doc).rfind("problem.colour: unknown key", 0) == 0);

  doc = base_config();
  doc["scheme"] = "async";
  CHECK(config_error(doc).rfind("delay: is required", 0) == 0);

  doc = base_config();
  doc["delay"] = {{"tau_transit", 1}, {"tau_pause", 1}};
  CHECK(config_error(doc).rfind("delay: only applies", 0) == 0);

  doc = base_config();
  doc["eps"] = json::array({0.5, -1});
  CHECK(config_error(doc).rfind("eps[1]: must be positive", 0) == 0);

  doc = base_config();
  doc["N"] = -2;
  CHECK(config_error(doc).rfind("N: must be >= -1", 0) == 0);

  doc = base_config();
  doc["method"] = {{"kind", "univ"}};
  CHECK(config_error(doc).rfind("method.L0: is required", 0) == 0);

  doc = base_config();
  doc["scheme"] = "async";
  doc["delay"] = {{"transit", "single-server"}, {"tau_transit", 1}, {"tau_pause", 1}};
  CHECK(config_error(doc).rfind("delay.tau_transit", 0) == 0);

  doc = base_config();
  doc["seeds"] = json::array({3, -1});
  CHECK(config_error(doc).rfind("seeds[1]: expected a nonnegative integer", 0) == 0);

  doc = base_config();
  doc["problem"].erase("x0");
  CHECK(config_error(doc).rfind("problem: exactly one of x0 and x0_gap", 0) == 0);
}

TEST_CASE("config accepts N = -1 and the eps forms") {
  auto doc = base_config();
  doc["N"] = -1;
  CHECK(*parse_config(doc).N == -1);
  doc["eps"] = {{"pow2", {1, 3}}};
  CHECK(parse_config(doc).eps == std::vector<double>{0.5, 0.25, 0.125});
  doc["eps"] = 0.1;
  CHECK(parse_config(doc).eps == std::vector<double>{0.1});
  doc["eps"] = json::array({0.5, 0.5});
  CHECK_THROWS_AS(parse_config(doc), ConfigurationError);
}

TEST_CASE("config file errors") {
  CHECK_THROWS_AS(parse_config_file("/nonexistent/parfom.json"), ConfigurationError);
  const auto dir = fresh_dir("parfom_cfg_test");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"problem\": ";
  CHECK_THROWS_AS(parse_config_file((dir / "bad.json").string()), ConfigurationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("x0_gap places the start at the requested gap") {
  auto doc = base_config();
  doc["problem"] = {{"kind", "norm_power"}, {"dimension", 4}, {"mu", 2.0}, {"d", 2.0}, {"x0_gap", 30.0}};
  const auto c = parse_config(doc);
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto cell = build_cell(c, 0.5, 2, seed);
    CHECK(evaluate(cell.problem, cell.x0).value == doctest::Approx(30.0).epsilon(1e-12));
  }
  CHECK((build_cell(c, 0.5, 2, 0).x0 - build_cell(c, 0.5, 2, 1).x0).norm() > 1e-3);
}

TEST_CASE("max-admissible L0 is admissible for every copy") {
  auto doc = base_config();
  doc["problem"] = {{"kind", "norm_power"}, {"dimension", 2}, {"mu", 1.0}, {"d", 1.5}, {"x0", {2.0, 1.0}}};
  doc["method"] = {{"kind", "univ"}, {"L0", "max-admissible"}};
  const auto c = parse_config(doc);
  const int N = 3;
  const auto cell = build_cell(c, 0.125, N, 0);
  const auto& m = *cell.problem.metadata();
  for (int n = -1; n <= N; ++n) {
    CHECK(l0_admissible(cell.method.L0, *m.holder_exponent, *m.holder_constant, std::ldexp(0.125, n)));
  }
}

TEST_CASE("run_cell reproduces the scheme and bound") {
  const auto c = parse_config(base_config());
  const auto cell = run_cell(c, 0.5, 0);
  const auto& s = cell.summary;
  REQUIRE(s.time_to_eps);
  REQUIRE(s.bound_theorem);
  CHECK(*s.time_to_eps <= *s.bound_theorem);
  CHECK(*s.compliant);
  CHECK(s.invariants_ok);
  CHECK(s.gap == 3.0);
  CHECK(s.n_bar == n_bar(3.0, 0.5));
  CHECK(s.N == default_N(0.5));
  REQUIRE(s.fit_exponent);
  CHECK(*s.fit_exponent == 0.0);
}

TEST_CASE("cell_key") {
  const auto c = parse_config(base_config());
  CHECK(cell_key(c, 3, 17) == "sync-lockstep-subgrad-eps03-seed17");
}

TEST_CASE("summary CSV and JSONL round trip") {
  auto c = parse_config(base_config());
  c.seeds = {0, 5};
  const auto rows = run_grid(c);
  REQUIRE(rows.size() == 8);

  std::stringstream jl;
  write_jsonl(rows, jl);
  const auto back = read_jsonl(jl);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(to_json(back[i]) == to_json(rows[i]));

  std::stringstream csv;
  write_csv(rows, csv);
  const auto parsed = read_csv(csv);
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].eps == rows[i].eps);
    CHECK(parsed[i].N == rows[i].N);
    CHECK(parsed[i].n_bar == rows[i].n_bar);
    CHECK(parsed[i].scheme == rows[i].scheme);
    CHECK(parsed[i].method == rows[i].method);
    CHECK(parsed[i].time_to_eps == rows[i].time_to_eps);
    CHECK(parsed[i].oracle_calls_total == rows[i].oracle_calls_total);
    CHECK(parsed[i].bound_theorem == rows[i].bound_theorem);
    CHECK(parsed[i].bound_corollary == rows[i].bound_corollary);
    CHECK(parsed[i].compliant == rows[i].compliant);
  }
  std::stringstream bad("eps,N\n");
  CHECK_THROWS(read_csv(bad));
}

TEST_CASE("run_grid writes byte-identical outputs on repeat") {
  auto doc = base_config();
  doc["scheme"] = "async";
  doc["delay"] = {{"transit", "uniform"}, {"tau_transit", 2.0}, {"pause", "uniform"}, {"tau_pause", 0.5}, {"seed", 9}};
  doc["seeds"] = {1, 2};
  const auto a = fresh_dir("parfom_grid_a");
  const auto b = fresh_dir("parfom_grid_b");
  doc["output"] = {{"dir", a.string()}};
  run_grid(parse_config(doc));
  doc["output"] = {{"dir", b.string()}};
  run_grid(parse_config(doc));

  int traces = 0;
  for (const auto& e : std::filesystem::directory_iterator(a / "traces")) {
    ++traces;
    CHECK(slurp(e.path()) == slurp(b / "traces" / e.path().filename()));
  }
  CHECK(traces == 8);
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("verify passes honest runs and flags a halved bound") {
  auto c = parse_config(base_config());
  auto rows = run_grid(c);
  const auto ok = verify_bounds(rows);
  CHECK(ok.passed == 4);
  CHECK(ok.exit_code() == 0);

  // Fault injection: halve the stored bound until the measured time exceeds it.
  auto& s = rows.back();
  REQUIRE(s.theorem_report);
  double halved = *s.bound_theorem;
  while (halved >= *s.time_to_eps) halved /= 2.0;
  s.bound_theorem = halved;
  const auto bad = verify_bounds(rows);
  CHECK(bad.failed == 1);
  CHECK(bad.exit_code() == 1);
  CHECK(bad.cells.back().status == CellStatus::fail);
  CHECK(bad.cells.back().detail.find("largest term " + s.theorem_report->dominant_term().label) != std::string::npos);
}

TEST_CASE("verify statuses for missing bounds, errors and invariants") {
  RunSummary none;
  none.eps = 0.5;
  RunSummary errored = none;
  errored.error = "boom";
  RunSummary broken = none;
  broken.invariants_ok = false;
  broken.invariant_violations = {"copy 0: update 1"};
  RunSummary budget = none;
  budget.bound_theorem = 100.0;
  RunSummary late = budget;
  late.compliant = false;

  const auto r = verify_bounds({none, errored, broken, budget, late});
  CHECK(r.cells[0].status == CellStatus::unverifiable);
  CHECK(r.cells[1].status == CellStatus::fail);
  CHECK(r.cells[2].status == CellStatus::fail);
  CHECK(r.cells[2].detail.find("copy 0: update 1") != std::string::npos);
  CHECK(r.cells[3].status == CellStatus::unverifiable);
  CHECK(r.cells[4].status == CellStatus::fail);
  CHECK(r.passed == 0);
  CHECK(r.failed == 3);
  CHECK(r.unverifiable == 2);
  CHECK(to_string(CellStatus::unverifiable) == "unverifiable");
}

TEST_CASE("fit_rate recovers exact log and power laws") {
  std::vector<RunSummary> rows;
  for (int k = 1; k <= 6; ++k) {
    RunSummary s;
    s.eps = std::ldexp(1.0, -k);
    s.time_to_eps = 3.0 * k + 2.0;
    rows.push_back(s);
  }
  const auto lf = fit_rate(rows, RateModel::log);
  CHECK(lf.slope == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(lf.intercept == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lf.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lf.points == 6);

  for (auto& s : rows) s.time_to_eps = 5.0 * std::pow(s.eps, -0.5) + 1.0;
  const auto pf = fit_rate(rows, RateModel::power, 0.5);
  CHECK(pf.slope == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(pf.intercept == doctest::Approx(1.0).epsilon(1e-10));

  rows.resize(4);
  rows[3].time_to_eps.reset();
  CHECK_THROWS_AS(fit_rate(rows, RateModel::log), ParameterError);
  CHECK_THROWS_AS(fit_rate(rows, RateModel::power, 0.0), ParameterError);
}

TEST_CASE("rate exponents") {
  CHECK(rate_exponent(MethodTag::subgrad, 1.0) == 0.0);
  CHECK(rate_exponent(MethodTag::subgrad, 2.0) == 1.0);
  CHECK(rate_exponent(MethodTag::accel, 2.0) == 0.0);
  CHECK(rate_exponent(MethodTag::accel, 4.0) == 0.25);
  CHECK(rate_exponent(MethodTag::univ, 2.0, 1.0) == 0.0);
  CHECK(rate_exponent(MethodTag::univ, 3.0, 0.0) == doctest::Approx(4.0 / 3.0));
  CHECK_THROWS_AS(rate_exponent(MethodTag::accel, 1.5), ParameterError);
}
