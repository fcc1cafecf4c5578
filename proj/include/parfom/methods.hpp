#pragma once

#include <string>

#include "parfom/problems.hpp"

namespace parfom {

enum class MethodTag { subgrad, accel, univ };

std::string to_string(MethodTag tag);
MethodTag method_tag_from_string(const std::string& name);

struct MethodKind {
  MethodTag tag = MethodTag::subgrad;
  double L = 0.0;   // accel: smoothness constant
  double L0 = 0.0;  // univ: initial estimate, reused at every restart

  static MethodKind subgrad() { return {MethodTag::subgrad, 0.0, 0.0}; }
  static MethodKind accel(double L) { return {MethodTag::accel, L, 0.0}; }
  static MethodKind univ(double L0) { return {MethodTag::univ, 0.0, L0}; }

  void validate() const;
};

struct MethodState {
  MethodKind kind;
  double target_accuracy = 1.0;
  Point restart_point;
  Point current_iterate;
  OracleOutput current_oracle;
  Point best_point;
  OracleOutput best_oracle;
  long iterate_index = 0;
  bool converged = false;

  // accel: x_{k-1}, extrapolated point y_k and its oracle when known, t_k
  Point accel_prev;
  Point accel_y;
  double accel_t = 1.0;

  // univ: A_k, accumulated gradients s_k, current estimate L_k
  double univ_A = 0.0;
  Eigen::VectorXd univ_s;
  double univ_L = 0.0;

  double best_value() const { return best_oracle.value; }
};

struct StepOutcome {
  Point new_iterate;
  double new_value = 0.0;
  int oracle_calls = 0;
  bool improved = false;
};

/// Hard cap on backtracking trials in one universal-method iteration.
inline constexpr int kUnivMaxTrials = 200;

/// Positions a fresh state at `start` (projected onto Q). Makes one oracle call.
MethodState method_init(const MethodKind& kind, const ProblemInstance& problem, const Point& start,
                        double target_accuracy);

/// Fresh state at `new_start` whose oracle output is already known. No oracle call.
MethodState method_restart(const MethodState& state, const ProblemInstance& problem,
                           const Point& new_start, const OracleOutput& known);

StepOutcome subgrad_step(MethodState& state, const ProblemInstance& problem);
StepOutcome accel_step(MethodState& state, const ProblemInstance& problem);
StepOutcome univ_step(MethodState& state, const ProblemInstance& problem);

/// Dispatches on state.kind.tag.
StepOutcome method_step(MethodState& state, const ProblemInstance& problem);

} // namespace parfom
