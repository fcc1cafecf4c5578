#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace parfom {

using Point = Eigen::VectorXd;

struct OracleOutput {
  double value = 0.0;
  Eigen::VectorXd subgradient;
};

/// Known structure of a test problem: growth f(x) - f* >= mu * dist(x, X*)^d,
/// plus whichever continuity constants apply. Real instances may omit it.
struct GrowthMetadata {
  std::optional<double> f_star;
  double mu = 1.0;
  double d = 1.0;
  std::optional<double> lipschitz;        // M: bound on subgradient norms
  std::optional<double> smoothness;       // L: gradient Lipschitz constant
  std::optional<double> holder_constant;  // M_nu
  std::optional<double> holder_exponent;  // nu in [0, 1]
  std::optional<double> dist_x0_to_opt;

  void validate() const;
};

class Objective {
public:
  virtual ~Objective() = default;
  virtual OracleOutput evaluate(const Point& x) const = 0;
  virtual std::string name() const = 0;
};

struct AllSpace {};
struct Ball {
  Point center;
  double radius = 1.0;
};
struct Box {
  Point lower;
  Point upper;
};
using FeasibleSet = std::variant<AllSpace, Ball, Box>;

struct SinglePoint {
  Point point;
};
/// anchor + span(directions); directions has orthonormal columns.
struct AffineSet {
  Point anchor;
  Eigen::MatrixXd directions;
};
using OptimalSet = std::variant<SinglePoint, AffineSet>;

/// Immutable after construction; safe to share across copies and threads.
class ProblemInstance {
public:
  ProblemInstance(int dimension, std::shared_ptr<const Objective> objective,
                  FeasibleSet feasible_set,
                  std::optional<GrowthMetadata> metadata = std::nullopt,
                  std::optional<OptimalSet> optimal_set = std::nullopt);

  int dimension() const { return dimension_; }
  const Objective& objective() const { return *objective_; }
  std::shared_ptr<const Objective> objective_ptr() const { return objective_; }
  const FeasibleSet& feasible_set() const { return feasible_set_; }
  const std::optional<GrowthMetadata>& metadata() const { return metadata_; }
  const std::optional<OptimalSet>& optimal_set() const { return optimal_set_; }
  bool unconstrained() const { return std::holds_alternative<AllSpace>(feasible_set_); }

  /// Same problem with a different objective (used to wrap oracles, e.g. for counting).
  ProblemInstance with_objective(std::shared_ptr<const Objective> objective) const;

private:
  int dimension_;
  std::shared_ptr<const Objective> objective_;
  FeasibleSet feasible_set_;
  std::optional<GrowthMetadata> metadata_;
  std::optional<OptimalSet> optimal_set_;
};

OracleOutput evaluate(const ProblemInstance& problem, const Point& x);
Point project(const ProblemInstance& problem, const Point& x);
Point project(const FeasibleSet& set, const Point& x);
bool is_feasible(const ProblemInstance& problem, const Point& x, double tol = 1e-12);

double distance_to_opt(const ProblemInstance& problem, const Point& x);
double distance_to_set(const OptimalSet& set, const Point& x);

/// ((f_hat - f*) / mu)^(1/d). Equals D(f_hat) for the norm-power family and
/// bounds it from above whenever the growth condition holds.
double growth_envelope(const GrowthMetadata& metadata, double f_hat);
double growth_envelope(const ProblemInstance& problem, double f_hat);

/// f(x) = mu * ||x - center||^d over the given domain (which must contain center).
ProblemInstance make_norm_power_problem(int dimension, double mu, double d, Point center,
                                        FeasibleSet domain = AllSpace{});

/// Hoelder constant of the gradient of x -> mu * ||x||^(1 + nu).
double norm_power_holder_constant(double mu, double nu);

/// f(x) = max_i a_i^T (x - center); rows of `slopes` are the a_i.
ProblemInstance make_piecewise_max_problem(const Eigen::MatrixXd& slopes, Point center);
ProblemInstance make_piecewise_max_problem(int dimension, int num_pieces, std::uint64_t seed);

/// min over the unit sphere of max_i a_i^T u, i.e. the inradius of conv{a_i}
/// about the origin. Returns 0 when the origin is not interior.
double piecewise_growth_constant(const Eigen::MatrixXd& slopes);

/// f(x) = 0.5 * ||A x - b||^2 on all of R^n.
ProblemInstance make_least_squares_problem(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);
/// A = U diag(s) V^T with random orthonormal U, V and singular values s spaced
/// geometrically from 1 to condition^(-1/2), so L / (2 mu) = condition.
/// b = A c, hence f* = 0 and X* = c + null(A).
ProblemInstance make_random_least_squares_problem(int rows, int dimension, int rank, std::uint64_t seed,
                                                  double condition = 10.0);

/// Deterministic 64-bit generator helpers shared by generators and simulators.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in (0, 1].
  double uniform_open_closed() { return 1.0 - uniform(); }
  double normal();
  Eigen::VectorXd normal_vector(int n);

private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

} // namespace parfom
