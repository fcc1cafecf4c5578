#include "parfom/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "parfom/bounds.hpp"
#include "parfom/errors.hpp"

namespace parfom::harness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigurationError(path + ": " + what);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) fail(path + "." + key, "unknown key");
  }
}

template <class T>
T get(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(path, "has the wrong type");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    fail(path, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::vector<double> get_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

ProblemSpec parse_problem(const json& j) {
  const std::string path = "problem";
  check_keys(j, path, {"kind", "dimension", "mu", "d", "center", "domain", "pieces", "rows", "rank", "condition", "seed", "x0", "x0_gap"});
  ProblemSpec p;
  if (!j.contains("kind")) fail(path + ".kind", "is required");
  p.kind = get<std::string>(j["kind"], path + ".kind");
  if (p.kind != "norm_power" && p.kind != "piecewise_max" && p.kind != "least_squares")
    fail(path + ".kind", "must be norm_power, piecewise_max or least_squares");
  if (!j.contains("dimension")) fail(path + ".dimension", "is required");
  p.dimension = get_int(j["dimension"], path + ".dimension");
  if (p.dimension <= 0) fail(path + ".dimension", "must be positive");
  if (j.contains("seed")) p.seed = get_seed(j["seed"], path + ".seed");

  if (p.kind == "norm_power") {
    if (j.contains("mu")) p.mu = get_positive(j["mu"], path + ".mu");
    if (j.contains("d")) p.d = get_number(j["d"], path + ".d");
    if (p.d < 1.0) fail(path + ".d", "must be >= 1");
    if (j.contains("center")) {
      p.center = get_vector(j["center"], path + ".center");
      if (static_cast<int>(p.center->size()) != p.dimension) fail(path + ".center", "must have `dimension` entries");
    }
    if (j.contains("domain")) {
      const json& dj = j["domain"];
      if (dj.is_string()) {
        p.domain = dj.get<std::string>();
        if (p.domain != "all") fail(path + ".domain", "a string domain must be \"all\"");
      } else {
        check_keys(dj, path + ".domain", {"type", "radius"});
        if (!dj.contains("type")) fail(path + ".domain.type", "is required");
        p.domain = get<std::string>(dj["type"], path + ".domain.type");
        if (p.domain != "all" && p.domain != "ball" && p.domain != "box")
          fail(path + ".domain.type", "must be all, ball or box");
        if (p.domain != "all") {
          if (!dj.contains("radius")) fail(path + ".domain.radius", "is required for a bounded domain");
          p.domain_radius = get_positive(dj["radius"], path + ".domain.radius");
        }
      }
    }
  } else {
    for (const char* key : {"mu", "d", "center", "domain"}) {
      if (j.contains(key)) fail(path + "." + key, "only applies to norm_power");
    }
  }
  if (p.kind == "piecewise_max") {
    if (!j.contains("pieces")) fail(path + ".pieces", "is required");
    p.pieces = get_int(j["pieces"], path + ".pieces");
    if (p.pieces < p.dimension + 1) fail(path + ".pieces", "must be at least dimension + 1");
  } else if (j.contains("pieces")) {
    fail(path + ".pieces", "only applies to piecewise_max");
  }
  if (p.kind == "least_squares") {
    p.rows = j.contains("rows") ? get_int(j["rows"], path + ".rows") : p.dimension;
    p.rank = j.contains("rank") ? get_int(j["rank"], path + ".rank") : std::min(p.rows, p.dimension);
    if (p.rows <= 0) fail(path + ".rows", "must be positive");
    if (p.rank <= 0 || p.rank > std::min(p.rows, p.dimension)) fail(path + ".rank", "must lie in [1, min(rows, dimension)]");
    if (j.contains("condition")) p.condition = get_number(j["condition"], path + ".condition");
    if (p.condition < 1.0) fail(path + ".condition", "must be >= 1");
  } else {
    for (const char* key : {"rows", "rank", "condition"}) {
      if (j.contains(key)) fail(path + "." + key, "only applies to least_squares");
    }
  }

  if (j.contains("x0") == j.contains("x0_gap")) fail(path, "exactly one of x0 and x0_gap is required");
  if (j.contains("x0")) {
    p.x0 = get_vector(j["x0"], path + ".x0");
    if (static_cast<int>(p.x0->size()) != p.dimension) fail(path + ".x0", "must have `dimension` entries");
  } else {
    p.x0_gap = get_positive(j["x0_gap"], path + ".x0_gap");
  }
  return p;
}

MethodSpec parse_method(const json& j) {
  const std::string path = "method";
  if (j.is_string()) {
    MethodSpec m;
    try {
      m.tag = method_tag_from_string(j.get<std::string>());
    } catch (const ConfigurationError& e) {
      fail(path, e.what());
    }
    if (m.tag == MethodTag::univ) fail(path, "univ needs an object with L0");
    return m;
  }
  check_keys(j, path, {"kind", "L", "L0"});
  MethodSpec m;
  if (!j.contains("kind")) fail(path + ".kind", "is required");
  try {
    m.tag = method_tag_from_string(get<std::string>(j["kind"], path + ".kind"));
  } catch (const ConfigurationError& e) {
    fail(path + ".kind", e.what());
  }
  if (j.contains("L")) {
    if (m.tag != MethodTag::accel) fail(path + ".L", "only applies to accel");
    m.L = get_positive(j["L"], path + ".L");
  }
  if (j.contains("L0")) {
    if (m.tag != MethodTag::univ) fail(path + ".L0", "only applies to univ");
    if (j["L0"].is_string()) {
      if (j["L0"].get<std::string>() != "max-admissible") fail(path + ".L0", "must be a number or \"max-admissible\"");
      m.L0_max_admissible = true;
    } else {
      m.L0 = get_positive(j["L0"], path + ".L0");
    }
  } else if (m.tag == MethodTag::univ) {
    fail(path + ".L0", "is required for univ");
  }
  return m;
}

std::vector<double> parse_eps(const json& j) {
  const std::string path = "eps";
  std::vector<double> eps;
  if (j.is_object()) {
    check_keys(j, path, {"pow2"});
    if (!j.contains("pow2")) fail(path + ".pow2", "is required");
    const json& r = j["pow2"];
    if (!r.is_array() || r.size() != 2) fail(path + ".pow2", "expected [first, last]");
    const int a = get_int(r[0], path + ".pow2[0]");
    const int b = get_int(r[1], path + ".pow2[1]");
    if (a > b) fail(path + ".pow2", "first must not exceed last");
    for (int k = a; k <= b; ++k) eps.push_back(std::ldexp(1.0, -k));
  } else if (j.is_number()) {
    eps.push_back(get_positive(j, path));
  } else {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array, a number or {\"pow2\": [a, b]}");
    for (std::size_t i = 0; i < j.size(); ++i) eps.push_back(get_positive(j[i], path + "[" + std::to_string(i) + "]"));
  }
  std::vector<double> sorted = eps;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail(path, "values must be distinct");
  return eps;
}

DelayModel parse_delay(const json& j) {
  const std::string path = "delay";
  check_keys(j, path, {"transit", "tau_transit", "service_time", "kappa", "pause", "tau_pause", "seed"});
  DelayModel d;
  const std::string transit = j.contains("transit") ? get<std::string>(j["transit"], path + ".transit") : "deterministic";
  if (transit == "deterministic") {
    d.transit = DelayModel::Transit::deterministic;
  } else if (transit == "uniform") {
    d.transit = DelayModel::Transit::uniform;
  } else if (transit == "single-server") {
    d.transit = DelayModel::Transit::single_server;
  } else {
    fail(path + ".transit", "must be deterministic, uniform or single-server");
  }
  if (d.transit == DelayModel::Transit::single_server) {
    if (j.contains("tau_transit")) fail(path + ".tau_transit", "does not apply to single-server transit");
    if (!j.contains("service_time")) fail(path + ".service_time", "is required for single-server transit");
    d.service_time = get_positive(j["service_time"], path + ".service_time");
    if (j.contains("kappa")) d.kappa = get_positive(j["kappa"], path + ".kappa");
  } else {
    if (j.contains("service_time") || j.contains("kappa")) fail(path, "service_time and kappa need single-server transit");
    if (!j.contains("tau_transit")) fail(path + ".tau_transit", "is required");
    d.tau_transit = get_positive(j["tau_transit"], path + ".tau_transit");
  }
  const std::string pause = j.contains("pause") ? get<std::string>(j["pause"], path + ".pause") : "deterministic";
  if (pause == "deterministic") {
    d.pause = DelayModel::Pause::deterministic;
  } else if (pause == "uniform") {
    d.pause = DelayModel::Pause::uniform;
  } else {
    fail(path + ".pause", "must be deterministic or uniform");
  }
  if (!j.contains("tau_pause")) fail(path + ".tau_pause", "is required");
  d.tau_pause = get_positive(j["tau_pause"], path + ".tau_pause");
  if (j.contains("seed")) d.seed = get_seed(j["seed"], path + ".seed");
  return d;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  Rng rng(a * 0x9E3779B97F4A7C15ULL ^ (b + 0x632BE59BD9B4E019ULL));
  return rng.next();
}

Point optimal_anchor(const ProblemInstance& problem) {
  if (!problem.optimal_set()) throw ConfigurationError("problem.x0_gap: the instance has no known optimum");
  if (const auto* sp = std::get_if<SinglePoint>(&*problem.optimal_set())) return sp->point;
  return std::get<AffineSet>(*problem.optimal_set()).anchor;
}

// x0 = c + r u with f(x0) - f* = gap, found by bisection along a seeded ray.
Point start_at_gap(const ProblemInstance& problem, double gap, std::uint64_t seed) {
  const Point c = optimal_anchor(problem);
  const double f_star = problem.metadata()->f_star.value();
  Rng rng(seed);
  Eigen::VectorXd u = rng.normal_vector(problem.dimension());
  u.normalize();
  auto excess = [&](double r) { return evaluate(problem, Point(c + r * u)).value - f_star; };
  double hi = 1.0;
  int guard = 0;
  while (excess(hi) < gap) {
    hi *= 2.0;
    if (++guard > 200) throw ConfigurationError("problem.x0_gap: objective does not reach the requested gap");
  }
  double lo = 0.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < gap ? lo : hi) = mid;
  }
  Point x0 = c + hi * u;
  if (!is_feasible(problem, x0, 1e-12)) throw ConfigurationError("problem.x0_gap: the start point leaves the domain");
  return x0;
}

} // namespace

std::string to_string(SchemeKind scheme) {
  switch (scheme) {
    case SchemeKind::sync_lockstep: return "sync-lockstep";
    case SchemeKind::sync_sequential: return "sync-sequential";
    case SchemeKind::async: return "async";
  }
  return "unknown";
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "config", {"problem", "method", "scheme", "eps", "N", "delay", "seeds", "budget", "output", "threaded"});
  ExperimentConfig c;
  for (const char* key : {"problem", "method", "scheme", "eps"}) {
    if (!doc.contains(key)) fail(key, "is required");
  }
  c.problem = parse_problem(doc["problem"]);
  c.method = parse_method(doc["method"]);
  const std::string scheme = get<std::string>(doc["scheme"], "scheme");
  if (scheme == "sync-lockstep") {
    c.scheme = SchemeKind::sync_lockstep;
  } else if (scheme == "sync-sequential") {
    c.scheme = SchemeKind::sync_sequential;
  } else if (scheme == "async") {
    c.scheme = SchemeKind::async;
  } else {
    fail("scheme", "must be sync-lockstep, sync-sequential or async");
  }
  c.eps = parse_eps(doc["eps"]);

  if (doc.contains("N")) {
    const json& n = doc["N"];
    if (n.is_string()) {
      if (n.get<std::string>() != "default") fail("N", "must be an integer or \"default\"");
    } else {
      c.N = get_int(n, "N");
      if (*c.N < -1) fail("N", "must be >= -1");
    }
  }

  if (c.scheme == SchemeKind::async) {
    if (!doc.contains("delay")) fail("delay", "is required for the async scheme");
    c.delay = parse_delay(doc["delay"]);
  } else if (doc.contains("delay")) {
    fail("delay", "only applies to the async scheme");
  }

  if (doc.contains("seeds")) {
    const json& s = doc["seeds"];
    if (!s.is_array() || s.empty()) fail("seeds", "expected a nonempty array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      c.seeds.push_back(get_seed(s[i], "seeds[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("budget")) {
    if (!doc["budget"].is_number_integer() || doc["budget"].get<std::int64_t>() <= 0) fail("budget", "expected a positive integer");
    c.budget = doc["budget"].get<std::int64_t>();
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    check_keys(o, "output", {"dir", "traces"});
    if (o.contains("dir")) c.output_dir = get<std::string>(o["dir"], "output.dir");
    if (o.contains("traces")) c.write_traces = get<bool>(o["traces"], "output.traces");
  }
  if (doc.contains("threaded")) {
    c.threaded = get<bool>(doc["threaded"], "threaded");
    if (c.threaded && c.scheme != SchemeKind::sync_lockstep) fail("threaded", "only applies to sync-lockstep");
  }
  if (c.method.tag == MethodTag::accel && c.scheme != SchemeKind::async && c.problem.kind == "norm_power" &&
      c.problem.domain != "all")
    fail("method", "accel needs an unconstrained problem");
  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path + ": malformed JSON: " + e.what());
  }
  return parse_config(doc);
}

int resolve_N(const ExperimentConfig& config, double eps) { return config.N ? *config.N : default_N(eps); }

CellSetup build_cell(const ExperimentConfig& config, double eps, int N, std::uint64_t seed) {
  const ProblemSpec& p = config.problem;
  const std::uint64_t gen_seed = mix(p.seed, seed);
  std::optional<ProblemInstance> problem;
  if (p.kind == "norm_power") {
    Point center = p.center ? Eigen::Map<const Eigen::VectorXd>(p.center->data(), p.dimension).eval()
                            : Eigen::VectorXd::Zero(p.dimension).eval();
    FeasibleSet domain = AllSpace{};
    if (p.domain == "ball") domain = Ball{center, p.domain_radius};
    if (p.domain == "box") {
      domain = Box{(center.array() - p.domain_radius).matrix(), (center.array() + p.domain_radius).matrix()};
    }
    problem.emplace(make_norm_power_problem(p.dimension, p.mu, p.d, center, domain));
  } else if (p.kind == "piecewise_max") {
    problem.emplace(make_piecewise_max_problem(p.dimension, p.pieces, gen_seed));
  } else {
    problem.emplace(make_random_least_squares_problem(p.rows, p.dimension, p.rank, gen_seed, p.condition));
  }

  Point x0 = p.x0 ? Eigen::Map<const Eigen::VectorXd>(p.x0->data(), p.dimension).eval()
                  : start_at_gap(*problem, *p.x0_gap, mix(gen_seed, 0x5354415254ULL));

  MethodKind kind = MethodKind::subgrad();
  const auto& meta = problem->metadata();
  if (config.method.tag == MethodTag::accel) {
    double L = 0.0;
    if (config.method.L) {
      L = *config.method.L;
    } else if (meta && meta->smoothness) {
      L = *meta->smoothness;
    } else {
      throw ConfigurationError("method.L: not given and the problem has no known smoothness constant");
    }
    kind = MethodKind::accel(L);
  } else if (config.method.tag == MethodTag::univ) {
    double L0 = 0.0;
    if (config.method.L0) {
      L0 = *config.method.L0;
    } else {
      if (!meta || !meta->holder_constant || !meta->holder_exponent)
        throw ConfigurationError("method.L0: max-admissible needs a known Hoelder constant");
      L0 = std::numeric_limits<double>::infinity();
      for (int n = -1; n <= N; ++n) {
        L0 = std::min(L0, l0_limit(*meta->holder_exponent, *meta->holder_constant, std::ldexp(eps, n)));
      }
    }
    kind = MethodKind::univ(L0);
  }
  return CellSetup{std::move(*problem), std::move(x0), kind};
}

} // namespace parfom::harness
