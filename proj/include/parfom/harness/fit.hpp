#pragma once

#include <string>
#include <vector>

#include "parfom/harness/grid.hpp"

namespace parfom::harness {

enum class RateModel { log, power };

struct FitResult {
  RateModel model = RateModel::log;
  double exponent = 0.0;  // p of the power model
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least squares of time-to-eps against log2(1/eps) (log model) or eps^-p
/// (power model). Needs at least four cells with a measured time.
FitResult fit_rate(const std::vector<RunSummary>& summaries, RateModel model, double exponent = 0.0);

/// Power-law exponent of the corollary for this method and growth.
double rate_exponent(MethodTag method, double d, double nu = 1.0);

} // namespace parfom::harness
