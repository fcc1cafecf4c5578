#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "parfom/methods.hpp"
#include "parfom/problems.hpp"

namespace parfom {

enum class BoundRegime { below_threshold, add_on };
std::string to_string(BoundRegime regime);

struct BoundTerm {
  std::string label;
  double value = 0.0;
};

struct BoundReport {
  std::string which;
  int n_bar = -1;  // the index the sum runs to (N itself in the add-on regime)
  double total = 0.0;
  std::vector<BoundTerm> terms;
  BoundRegime regime = BoundRegime::below_threshold;
  bool assumptions_ok = true;
  std::string note;

  void add(std::string label, double value);
  /// Label of the largest term.
  const BoundTerm& dominant_term() const;
};

/// floor(x) that forgives a few ulps of rounding below an integer.
std::int64_t tolerant_floor(double x);

std::int64_t k_subgrad(double M, double delta, double eps_bar);
std::int64_t k_accel(double L, double delta, double eps_bar);
std::int64_t k_univ(double M_nu, double nu, double delta, double eps_bar);

/// 4 + log2(delta^a (2/eps)^b M_nu^c) - 2 log2 L0, the per-copy overhead of univ.
double c_const(double delta, double eps, double nu, double M_nu, double L0);
/// Time (oracle calls) for univ to reach eps_bar from distance delta.
double t_univ(double M_nu, double nu, double delta, double eps_bar, double L0);
/// Oracle calls in the first k univ iterations.
double univ_call_bound(double M_nu, double nu, double delta, double eps_bar, double L0, std::int64_t k);
/// Upper limit on L0 under which the univ call bound is valid at accuracy eps_bar.
double l0_limit(double nu, double M_nu, double eps_bar);
bool l0_admissible(double L0, double nu, double M_nu, double eps_bar);

int default_N(double eps);
int n_bar(double gap, double eps);

/// delta -> bound, for a fixed accuracy.
using RateFunction = std::function<double(double delta, double eps_bar)>;

/// Iteration bound K for the given method on a problem with this metadata.
RateFunction iteration_bound(const GrowthMetadata& metadata, const MethodKind& kind);
/// Time bound T (oracle calls) used by the asynchronous scheme.
RateFunction time_bound(const GrowthMetadata& metadata, const MethodKind& kind);

/// Periods of the lock-step scheme, `method_k` = K.
BoundReport bound_sync_theorem(const GrowthMetadata& metadata, double f_x0, double eps, int N,
                               const RateFunction& method_k);
BoundReport bound_cor_subgrad(const GrowthMetadata& metadata, double f_x0, double eps, int N);
BoundReport bound_cor_accel(const GrowthMetadata& metadata, double f_x0, double eps, int N);

/// Simulated time of the asynchronous scheme, `method_t` = T.
BoundReport bound_async_theorem(const GrowthMetadata& metadata, double f_x0, double eps, int N,
                                double tau_transit, double tau_pause, const RateFunction& method_t);
BoundReport bound_cor_univ(const GrowthMetadata& metadata, double f_x0, double eps, int N,
                           double tau_transit, double tau_pause, double L0);

} // namespace parfom
