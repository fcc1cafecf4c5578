#include "parfom/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "parfom/errors.hpp"

namespace parfom {

namespace {

void require_dimension(const ProblemInstance& problem, const Point& x, const char* what) {
  if (x.size() != problem.dimension()) {
    std::ostringstream msg;
    msg << what << ": point has dimension " << x.size() << ", problem has " << problem.dimension();
    throw ContractViolation(msg.str());
  }
}

class NormPowerObjective final : public Objective {
public:
  NormPowerObjective(double mu, double d, Point center)
      : mu_(mu), d_(d), center_(std::move(center)) {}

  OracleOutput evaluate(const Point& x) const override {
    const Eigen::VectorXd diff = x - center_;
    const double r = diff.norm();
    OracleOutput out;
    out.value = mu_ * std::pow(r, d_);
    if (r == 0.0) {
      out.subgradient = Eigen::VectorXd::Zero(x.size());
    } else {
      out.subgradient = (mu_ * d_ * std::pow(r, d_ - 2.0)) * diff;
    }
    return out;
  }

  std::string name() const override { return "norm_power"; }

private:
  double mu_;
  double d_;
  Point center_;
};

class PiecewiseMaxObjective final : public Objective {
public:
  PiecewiseMaxObjective(Eigen::MatrixXd slopes, Eigen::VectorXd offsets)
      : slopes_(std::move(slopes)), offsets_(std::move(offsets)) {}

  OracleOutput evaluate(const Point& x) const override {
    const Eigen::VectorXd pieces = slopes_ * x + offsets_;
    // Lowest index wins ties.
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < pieces.size(); ++i) {
      if (pieces[i] > pieces[best]) best = i;
    }
    return OracleOutput{pieces[best], slopes_.row(best).transpose()};
  }

  std::string name() const override { return "piecewise_max"; }

private:
  Eigen::MatrixXd slopes_;
  Eigen::VectorXd offsets_;
};

class LeastSquaresObjective final : public Objective {
public:
  LeastSquaresObjective(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}

  OracleOutput evaluate(const Point& x) const override {
    const Eigen::VectorXd residual = A_ * x - b_;
    return OracleOutput{0.5 * residual.squaredNorm(), A_.transpose() * residual};
  }

  std::string name() const override { return "least_squares"; }

private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

// Largest distance from `c` to a point of a bounded domain, or nullopt.
std::optional<double> domain_radius_about(const FeasibleSet& set, const Point& c) {
  if (const auto* ball = std::get_if<Ball>(&set)) {
    return (c - ball->center).norm() + ball->radius;
  }
  if (const auto* box = std::get_if<Box>(&set)) {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double far = std::max(std::abs(c[i] - box->lower[i]), std::abs(box->upper[i] - c[i]));
      sq += far * far;
    }
    return std::sqrt(sq);
  }
  return std::nullopt;
}

bool next_combination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  int i = k - 1;
  while (i >= 0 && idx[i] == n - k + i) --i;
  if (i < 0) return false;
  ++idx[i];
  for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  return true;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

} // namespace

void GrowthMetadata::validate() const {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ParameterError("growth constant mu must be positive");
  if (!(d >= 1.0) || !std::isfinite(d)) throw ParameterError("growth degree d must be >= 1");
  if (holder_exponent) {
    const double nu = *holder_exponent;
    if (nu < 0.0 || nu > 1.0) throw ParameterError("Hoelder exponent nu must lie in [0, 1]");
    if (d < 1.0 + nu - 1e-12) throw ParameterError("growth degree must satisfy d >= 1 + nu");
  }
  for (const auto& c : {lipschitz, smoothness, holder_constant, dist_x0_to_opt}) {
    if (c && !(*c >= 0.0)) throw ParameterError("continuity constants must be nonnegative");
  }
}

ProblemInstance::ProblemInstance(int dimension, std::shared_ptr<const Objective> objective,
                                 FeasibleSet feasible_set, std::optional<GrowthMetadata> metadata,
                                 std::optional<OptimalSet> optimal_set)
    : dimension_(dimension),
      objective_(std::move(objective)),
      feasible_set_(std::move(feasible_set)),
      metadata_(std::move(metadata)),
      optimal_set_(std::move(optimal_set)) {
  if (dimension_ <= 0) throw ParameterError("dimension must be positive");
  if (!objective_) throw ParameterError("objective must not be null");
  if (metadata_) metadata_->validate();
  if (const auto* ball = std::get_if<Ball>(&feasible_set_)) {
    if (ball->center.size() != dimension_ || !(ball->radius > 0.0))
      throw ParameterError("ball domain must match the dimension and have positive radius");
  }
  if (const auto* box = std::get_if<Box>(&feasible_set_)) {
    if (box->lower.size() != dimension_ || box->upper.size() != dimension_ ||
        (box->upper - box->lower).minCoeff() < 0.0)
      throw ParameterError("box domain must match the dimension with lower <= upper");
  }
}

ProblemInstance ProblemInstance::with_objective(std::shared_ptr<const Objective> objective) const {
  return ProblemInstance(dimension_, std::move(objective), feasible_set_, metadata_, optimal_set_);
}

OracleOutput evaluate(const ProblemInstance& problem, const Point& x) {
  require_dimension(problem, x, "evaluate");
  if (!x.allFinite()) throw InputError("evaluate: point has a non-finite coordinate");
  return problem.objective().evaluate(x);
}

Point project(const FeasibleSet& set, const Point& x) {
  return std::visit(
      [&](const auto& s) -> Point {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, AllSpace>) {
          return x;
        } else if constexpr (std::is_same_v<S, Ball>) {
          const Eigen::VectorXd diff = x - s.center;
          const double r = diff.norm();
          if (r <= s.radius) return x;
          return s.center + (s.radius / r) * diff;
        } else {
          return x.cwiseMax(s.lower).cwiseMin(s.upper);
        }
      },
      set);
}

Point project(const ProblemInstance& problem, const Point& x) {
  require_dimension(problem, x, "project");
  return project(problem.feasible_set(), x);
}

bool is_feasible(const ProblemInstance& problem, const Point& x, double tol) {
  require_dimension(problem, x, "is_feasible");
  return (project(problem, x) - x).norm() <= tol * std::max(1.0, x.norm());
}

double distance_to_set(const OptimalSet& set, const Point& x) {
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, SinglePoint>) {
          return (x - s.point).norm();
        } else {
          const Eigen::VectorXd diff = x - s.anchor;
          return (diff - s.directions * (s.directions.transpose() * diff)).norm();
        }
      },
      set);
}

double distance_to_opt(const ProblemInstance& problem, const Point& x) {
  require_dimension(problem, x, "distance_to_opt");
  if (!problem.optimal_set()) throw UnsupportedQuery("distance_to_opt: problem has no description of X*");
  return distance_to_set(*problem.optimal_set(), x);
}

double growth_envelope(const GrowthMetadata& metadata, double f_hat) {
  if (!metadata.f_star) throw UnsupportedQuery("growth_envelope: f* is unknown");
  const double gap = f_hat - *metadata.f_star;
  if (gap < 0.0) throw ParameterError("growth_envelope: f_hat must be >= f*");
  return std::pow(gap / metadata.mu, 1.0 / metadata.d);
}

double growth_envelope(const ProblemInstance& problem, double f_hat) {
  if (!problem.metadata()) throw UnsupportedQuery("growth_envelope: problem carries no growth metadata");
  return growth_envelope(*problem.metadata(), f_hat);
}

double norm_power_holder_constant(double mu, double nu) {
  // The map x -> ||x||^(nu-1) x is nu-Hoelder with constant 2^(1-nu), attained at y = -x.
  return mu * (1.0 + nu) * std::pow(2.0, 1.0 - nu);
}

ProblemInstance make_norm_power_problem(int dimension, double mu, double d, Point center,
                                        FeasibleSet domain) {
  if (!(mu > 0.0)) throw ParameterError("make_norm_power_problem: mu must be positive");
  if (!(d >= 1.0)) throw ParameterError("make_norm_power_problem: d must be >= 1");
  if (center.size() != dimension) throw ContractViolation("make_norm_power_problem: center dimension mismatch");
  if ((project(domain, center) - center).norm() > 0.0)
    throw ParameterError("make_norm_power_problem: domain must contain the center");

  GrowthMetadata meta;
  meta.f_star = 0.0;
  meta.mu = mu;
  meta.d = d;
  const auto radius = domain_radius_about(domain, center);
  if (d == 1.0) {
    meta.lipschitz = mu;
    meta.holder_exponent = 0.0;
    meta.holder_constant = norm_power_holder_constant(mu, 0.0);
  } else if (d <= 2.0) {
    const double nu = d - 1.0;
    meta.holder_exponent = nu;
    meta.holder_constant = norm_power_holder_constant(mu, nu);
  }
  if (d == 2.0) meta.smoothness = 2.0 * mu;
  if (radius && d > 1.0) {
    meta.lipschitz = mu * d * std::pow(*radius, d - 1.0);
    if (d > 2.0) meta.smoothness = mu * d * (d - 1.0) * std::pow(*radius, d - 2.0);
  }

  auto objective = std::make_shared<NormPowerObjective>(mu, d, center);
  return ProblemInstance(dimension, std::move(objective), std::move(domain), meta,
                         OptimalSet{SinglePoint{std::move(center)}});
}

double piecewise_growth_constant(const Eigen::MatrixXd& slopes) {
  const int m = static_cast<int>(slopes.rows());
  const int n = static_cast<int>(slopes.cols());
  if (m < n + 1) return 0.0;
  if (binomial(m, n) > 2e6) throw ParameterError("piecewise_growth_constant: too many facets to enumerate");

  const double scale = std::max(1.0, slopes.rowwise().norm().maxCoeff());
  const double tol = 1e-12 * scale;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;

  // Facets of conv{a_i}: hyperplanes through n affinely independent rows that
  // leave every row on one side. The origin's distance to the nearest facet is
  // the minimum of the support function over the unit sphere.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  do {
    Eigen::VectorXd normal;
    if (n == 1) {
      normal = Eigen::VectorXd::Ones(1);
    } else {
      Eigen::MatrixXd diffs(n - 1, n);
      for (int k = 1; k < n; ++k) diffs.row(k - 1) = slopes.row(idx[k]) - slopes.row(idx[0]);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(diffs);
      lu.setThreshold(1e-10);
      const Eigen::MatrixXd kernel = lu.kernel();
      if (kernel.cols() != 1) continue;
      normal = kernel.col(0).normalized();
    }
    double offset = normal.dot(slopes.row(idx[0]).transpose());
    if (offset < 0.0) {
      normal = -normal;
      offset = -offset;
    }
    const Eigen::VectorXd heights = slopes * normal;
    if (heights.maxCoeff() <= offset + tol) {
      any = true;
      best = std::min(best, offset);
    } else if (offset <= tol && heights.minCoeff() >= -tol) {
      // Hyperplane through the origin supporting from the other side.
      any = true;
      best = 0.0;
    }
  } while (next_combination(idx, m));

  if (!any || best <= tol) return 0.0;
  return best;
}

ProblemInstance make_piecewise_max_problem(const Eigen::MatrixXd& slopes, Point center) {
  const int n = static_cast<int>(slopes.cols());
  if (center.size() != n) throw ContractViolation("make_piecewise_max_problem: center dimension mismatch");
  if (slopes.rows() < n + 1) throw ParameterError("make_piecewise_max_problem: need at least dimension + 1 pieces");
  const double mu = piecewise_growth_constant(slopes);
  if (!(mu > 0.0)) throw ParameterError("make_piecewise_max_problem: minimizer is not unique");

  GrowthMetadata meta;
  meta.f_star = 0.0;
  meta.mu = mu;
  meta.d = 1.0;
  meta.lipschitz = slopes.rowwise().norm().maxCoeff();
  const Eigen::VectorXd offsets = -(slopes * center);
  auto objective = std::make_shared<PiecewiseMaxObjective>(slopes, offsets);
  return ProblemInstance(n, std::move(objective), AllSpace{}, meta, OptimalSet{SinglePoint{std::move(center)}});
}

ProblemInstance make_piecewise_max_problem(int dimension, int num_pieces, std::uint64_t seed) {
  if (dimension <= 0) throw ParameterError("make_piecewise_max_problem: dimension must be positive");
  if (num_pieces < dimension + 1) throw ParameterError("make_piecewise_max_problem: need num_pieces >= dimension + 1");
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Eigen::MatrixXd slopes(num_pieces, dimension);
    for (int i = 0; i < num_pieces; ++i) slopes.row(i) = rng.normal_vector(dimension).transpose();
    // Centering puts the origin inside conv{a_i}, so c is the minimizer.
    slopes.rowwise() -= slopes.colwise().mean();
    const Point center = rng.normal_vector(dimension);
    const double mu = piecewise_growth_constant(slopes);
    if (mu > 1e-6 * slopes.rowwise().norm().maxCoeff()) return make_piecewise_max_problem(slopes, center);
  }
  throw ParameterError("make_piecewise_max_problem: could not build a nondegenerate instance");
}

ProblemInstance make_least_squares_problem(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw ContractViolation("make_least_squares_problem: A and b disagree");
  const int n = static_cast<int>(A.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) throw ParameterError("make_least_squares_problem: A must be nonzero");
  const double cutoff = 1e-10 * sv[0];
  int rank = 0;
  while (rank < sv.size() && sv[rank] > cutoff) ++rank;
  svd.setThreshold(1e-10);
  const Eigen::VectorXd x_star = svd.solve(b);

  GrowthMetadata meta;
  meta.f_star = 0.5 * (A * x_star - b).squaredNorm();
  meta.mu = 0.5 * sv[rank - 1] * sv[rank - 1];
  meta.d = 2.0;
  meta.smoothness = sv[0] * sv[0];
  meta.holder_exponent = 1.0;
  meta.holder_constant = sv[0] * sv[0];

  OptimalSet opt = SinglePoint{x_star};
  if (rank < n) opt = AffineSet{x_star, svd.matrixV().rightCols(n - rank)};
  auto objective = std::make_shared<LeastSquaresObjective>(A, b);
  return ProblemInstance(n, std::move(objective), AllSpace{}, meta, std::move(opt));
}

ProblemInstance make_random_least_squares_problem(int rows, int dimension, int rank, std::uint64_t seed,
                                                  double condition) {
  if (rows <= 0 || dimension <= 0 || rank <= 0 || rank > std::min(rows, dimension))
    throw ParameterError("make_random_least_squares_problem: need 0 < rank <= min(rows, dimension)");
  if (!(condition >= 1.0) || !std::isfinite(condition))
    throw ParameterError("make_random_least_squares_problem: condition must be >= 1");
  Rng rng(seed);
  auto orthonormal = [&rng](int m, int k) {
    Eigen::MatrixXd g(m, k);
    for (int i = 0; i < m; ++i) g.row(i) = rng.normal_vector(k).transpose();
    return Eigen::MatrixXd(Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() * Eigen::MatrixXd::Identity(m, k));
  };
  const Eigen::MatrixXd U = orthonormal(rows, rank);
  const Eigen::MatrixXd V = orthonormal(dimension, rank);
  // Singular values from 1 down to condition^(-1/2), geometrically spaced.
  Eigen::VectorXd sv(rank);
  for (int i = 0; i < rank; ++i) sv[i] = rank == 1 ? 1.0 : std::pow(condition, -0.5 * i / (rank - 1));
  const Eigen::MatrixXd A = U * sv.asDiagonal() * V.transpose();
  const Point center = rng.normal_vector(dimension);
  const Eigen::VectorXd b = A * center;

  // Reuse the generic constructor for the constants, then pin f* = 0 and
  // anchor X* at the exact center.
  const ProblemInstance generic = make_least_squares_problem(A, b);
  GrowthMetadata meta = *generic.metadata();
  meta.f_star = 0.0;
  OptimalSet opt = SinglePoint{center};
  if (const auto* affine = std::get_if<AffineSet>(&*generic.optimal_set())) {
    opt = AffineSet{center, affine->directions};
  }
  return ProblemInstance(dimension, generic.objective_ptr(), AllSpace{}, meta, std::move(opt));
}

Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next() {
  // splitmix64: portable, so seeded runs agree across standard libraries.
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = uniform_open_closed();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Eigen::VectorXd Rng::normal_vector(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal();
  return v;
}

} // namespace parfom
