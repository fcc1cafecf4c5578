#include "parfom/harness/fit.hpp"

#include <cmath>

#include "parfom/errors.hpp"

namespace parfom::harness {

FitResult fit_rate(const std::vector<RunSummary>& summaries, RateModel model, double exponent) {
  if (model == RateModel::power && !(exponent > 0.0)) throw ParameterError("fit_rate: power model needs p > 0");
  std::vector<double> xs, ys;
  for (const auto& s : summaries) {
    if (!s.time_to_eps || !(s.eps > 0.0)) continue;
    xs.push_back(model == RateModel::log ? std::log2(1.0 / s.eps) : std::pow(s.eps, -exponent));
    ys.push_back(*s.time_to_eps);
  }
  const std::size_t n = xs.size();
  if (n < 4) throw ParameterError("fit_rate: need at least four measured cells");

  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = xs[i];
    X(i, 1) = 1.0;
    y[i] = ys[i];
  }
  const double x_spread = X.col(0).maxCoeff() - X.col(0).minCoeff();
  if (!(x_spread > 0.0)) throw ParameterError("fit_rate: all eps values coincide");
  const Eigen::Vector2d coef = X.colPivHouseholderQr().solve(y);

  FitResult fit;
  fit.model = model;
  fit.exponent = model == RateModel::power ? exponent : 0.0;
  fit.slope = coef[0];
  fit.intercept = coef[1];
  fit.points = static_cast<int>(n);
  const double ss_res = (y - X * coef).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double rate_exponent(MethodTag method, double d, double nu) {
  switch (method) {
    case MethodTag::subgrad:
      if (d < 1.0) throw ParameterError("rate_exponent: d must be >= 1");
      return 2.0 * (1.0 - 1.0 / d);
    case MethodTag::accel:
      if (d < 2.0) throw ParameterError("rate_exponent: accel needs d >= 2");
      return 0.5 - 1.0 / d;
    case MethodTag::univ:
      if (d < 1.0 + nu) throw ParameterError("rate_exponent: univ needs d >= 1 + nu");
      return (1.0 - (1.0 + nu) / d) * 2.0 / (1.0 + 3.0 * nu);
  }
  throw ContractViolation("rate_exponent: unknown method");
}

} // namespace parfom::harness
