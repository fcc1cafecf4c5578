#include "parfom/methods.hpp"

#include <cmath>
#include <sstream>

#include "parfom/errors.hpp"

namespace parfom {

namespace {

void require_tag(const MethodState& state, MethodTag tag, const char* what) {
  if (state.kind.tag != tag) throw ContractViolation(std::string(what) + ": wrong method kind");
}

StepOutcome record_iterate(MethodState& state, Point x, OracleOutput out, int calls) {
  StepOutcome step;
  step.new_iterate = x;
  step.new_value = out.value;
  step.oracle_calls = calls;
  step.improved = out.value < state.best_oracle.value;
  if (step.improved) {
    state.best_point = x;
    state.best_oracle = out;
  }
  state.current_iterate = std::move(x);
  state.current_oracle = std::move(out);
  ++state.iterate_index;
  return step;
}

MethodState fresh_state(const MethodKind& kind, const Point& start, const OracleOutput& out,
                        double target_accuracy) {
  MethodState s;
  s.kind = kind;
  s.target_accuracy = target_accuracy;
  s.restart_point = start;
  s.current_iterate = start;
  s.current_oracle = out;
  s.best_point = start;
  s.best_oracle = out;
  s.accel_prev = start;
  s.accel_y = start;
  s.accel_t = 1.0;
  s.univ_A = 0.0;
  s.univ_s = Eigen::VectorXd::Zero(start.size());
  s.univ_L = kind.L0;
  return s;
}

} // namespace

std::string to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::subgrad: return "subgrad";
    case MethodTag::accel: return "accel";
    case MethodTag::univ: return "univ";
  }
  return "unknown";
}

MethodTag method_tag_from_string(const std::string& name) {
  if (name == "subgrad") return MethodTag::subgrad;
  if (name == "accel") return MethodTag::accel;
  if (name == "univ") return MethodTag::univ;
  throw ConfigurationError("unknown method '" + name + "'");
}

void MethodKind::validate() const {
  if (tag == MethodTag::accel && !(L > 0.0 && std::isfinite(L)))
    throw ConfigurationError("accel needs a positive smoothness constant L");
  if (tag == MethodTag::univ && !(L0 > 0.0 && std::isfinite(L0)))
    throw ParameterError("univ needs a positive initial estimate L0");
}

MethodState method_init(const MethodKind& kind, const ProblemInstance& problem, const Point& start,
                        double target_accuracy) {
  if (!(target_accuracy > 0.0)) throw ParameterError("method_init: target accuracy must be positive");
  kind.validate();
  if (kind.tag == MethodTag::accel && !problem.unconstrained())
    throw UnsupportedQuery("accel is only offered on unconstrained problems");
  const Point x0 = project(problem, start);
  return fresh_state(kind, x0, evaluate(problem, x0), target_accuracy);
}

MethodState method_restart(const MethodState& state, const ProblemInstance& problem,
                           const Point& new_start, const OracleOutput& known) {
  if (new_start.size() != problem.dimension()) throw ContractViolation("method_restart: dimension mismatch");
  return fresh_state(state.kind, new_start, known, state.target_accuracy);
}

StepOutcome subgrad_step(MethodState& state, const ProblemInstance& problem) {
  require_tag(state, MethodTag::subgrad, "subgrad_step");
  const Eigen::VectorXd& g = state.current_oracle.subgradient;
  const double g2 = g.squaredNorm();
  if (state.converged || g2 == 0.0) {
    state.converged = true;
    return StepOutcome{state.current_iterate, state.current_oracle.value, 0, false};
  }
  Point next = project(problem, state.current_iterate - (state.target_accuracy / g2) * g);
  OracleOutput out = evaluate(problem, next);
  return record_iterate(state, std::move(next), std::move(out), 1);
}

StepOutcome accel_step(MethodState& state, const ProblemInstance& problem) {
  require_tag(state, MethodTag::accel, "accel_step");
  const double L = state.kind.L;
  int calls = 0;
  // While the momentum weight has been zero, y_k equals x_k and its gradient is cached.
  OracleOutput at_y;
  if (state.accel_y == state.current_iterate) {
    at_y = state.current_oracle;
  } else {
    at_y = evaluate(problem, state.accel_y);
    ++calls;
  }
  Point x = state.accel_y - at_y.subgradient / L;
  const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * state.accel_t * state.accel_t));
  const double weight = (state.accel_t - 1.0) / t_next;
  Point y_next = x + weight * (x - state.current_iterate);
  state.accel_prev = state.current_iterate;
  state.accel_t = t_next;
  state.accel_y = std::move(y_next);

  OracleOutput out = evaluate(problem, x);
  ++calls;
  return record_iterate(state, std::move(x), std::move(out), calls);
}

StepOutcome univ_step(MethodState& state, const ProblemInstance& problem) {
  require_tag(state, MethodTag::univ, "univ_step");
  const double eps_bar = state.target_accuracy;
  const Point z = state.restart_point - state.univ_s;
  const Point v = project(problem, z);
  const Point& y = state.current_iterate;
  int calls = 0;
  double M = state.univ_L;
  for (int trial = 0; trial < kUnivMaxTrials; ++trial) {
    const double a = (1.0 + std::sqrt(1.0 + 4.0 * M * state.univ_A)) / (2.0 * M);
    const double A_next = state.univ_A + a;
    const double tau = a / A_next;
    const Point x = tau * v + (1.0 - tau) * y;
    const OracleOutput at_x = evaluate(problem, x);
    // Minimizer of the prox term plus the updated linear model over Q.
    const Point x_hat = project(problem, Point(z - a * at_x.subgradient));
    Point y_next = tau * x_hat + (1.0 - tau) * y;
    OracleOutput at_y = evaluate(problem, y_next);
    calls += 2;
    const Eigen::VectorXd diff = y_next - x;
    const double model = at_x.value + at_x.subgradient.dot(diff) + 0.5 * M * diff.squaredNorm() +
                         0.5 * eps_bar * tau;
    if (at_y.value <= model) {
      state.univ_A = A_next;
      state.univ_s += a * at_x.subgradient;
      state.univ_L = 0.5 * M;
      return record_iterate(state, std::move(y_next), std::move(at_y), calls);
    }
    M *= 2.0;
  }
  std::ostringstream msg;
  msg << "univ_step: line search did not terminate within " << kUnivMaxTrials << " trials";
  throw DiagnosticError(msg.str());
}

StepOutcome method_step(MethodState& state, const ProblemInstance& problem) {
  switch (state.kind.tag) {
    case MethodTag::subgrad: return subgrad_step(state, problem);
    case MethodTag::accel: return accel_step(state, problem);
    case MethodTag::univ: return univ_step(state, problem);
  }
  throw ContractViolation("method_step: unknown method kind");
}

} // namespace parfom
