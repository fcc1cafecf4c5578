#pragma once

#include <atomic>
#include <memory>

#include "parfom/problems.hpp"

namespace parfom::testing {

// Wraps an objective and counts evaluate() calls.
class CountingObjective final : public Objective {
public:
  explicit CountingObjective(std::shared_ptr<const Objective> inner) : inner_(std::move(inner)) {}
  OracleOutput evaluate(const Point& x) const override {
    ++calls_;
    return inner_->evaluate(x);
  }
  std::string name() const override { return inner_->name(); }
  long calls() const { return calls_; }

private:
  std::shared_ptr<const Objective> inner_;
  mutable std::atomic<long> calls_{0};
};

struct Counted {
  std::shared_ptr<CountingObjective> counter;
  ProblemInstance problem;
};

inline Counted counted(const ProblemInstance& p) {
  auto c = std::make_shared<CountingObjective>(p.objective_ptr());
  return Counted{c, p.with_objective(c)};
}

inline Point vec(std::initializer_list<double> xs) {
  Point p(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) p[i++] = x;
  return p;
}

// Feasible sample of a problem's domain around `center` with radius r.
inline Point sample_near(Rng& rng, const Point& center, double r) {
  Eigen::VectorXd u = rng.normal_vector(static_cast<int>(center.size()));
  return center + r * rng.uniform() * u.normalized();
}

} // namespace parfom::testing
