#include "parfom/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "parfom/errors.hpp"

namespace parfom {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(what) + " must be positive and finite");
}

void require_nu(double nu) {
  if (!(nu >= 0.0 && nu <= 1.0)) throw ParameterError("nu must lie in [0, 1]");
}

double f_star_of(const GrowthMetadata& m, const char* what) {
  if (!m.f_star) throw UnsupportedQuery(std::string(what) + ": f* is unknown");
  return *m.f_star;
}

double require_constant(const std::optional<double>& c, const char* name, const char* what) {
  if (!c) throw UnsupportedQuery(std::string(what) + ": metadata lacks " + name);
  return *c;
}

double dist_of(const GrowthMetadata& m, const char* what) {
  return require_constant(m.dist_x0_to_opt, "dist(x0, X*)", what);
}

std::string n_label(const char* prefix, int n) {
  std::ostringstream s;
  s << prefix << "[n=" << n << "]";
  return s.str();
}

// Shared skeleton: regime selection and the per-copy sum.
struct Regime {
  BoundRegime regime;
  int top;  // N-bar, or N in the add-on regime
  double gap;
};

Regime select_regime(const GrowthMetadata& m, double f_x0, double eps, int N, const char* what) {
  require_positive(eps, "eps");
  if (N < -1) throw ParameterError("N must be >= -1");
  const double gap = f_x0 - f_star_of(m, what);
  if (!(gap >= 0.0)) throw ParameterError(std::string(what) + ": f(x0) is below f*");
  if (gap < 5.0 * std::ldexp(eps, N)) return {BoundRegime::below_threshold, n_bar(gap, eps), gap};
  return {BoundRegime::add_on, N, gap};
}

// D_n = min{D(f* + 5 2^n eps), D(f(x0))} through the growth envelope.
double d_n(const GrowthMetadata& m, double f_x0, double eps, int n) {
  return growth_envelope(m, std::min(*m.f_star + 5.0 * std::ldexp(eps, n), f_x0));
}

double univ_exponent(double nu) { return (3.0 + 5.0 * nu) / (1.0 + 3.0 * nu); }

} // namespace

std::string to_string(BoundRegime regime) {
  return regime == BoundRegime::below_threshold ? "below-5-2^N" : "add-on";
}

void BoundReport::add(std::string label, double value) {
  terms.push_back({std::move(label), value});
  total += value;
}

const BoundTerm& BoundReport::dominant_term() const {
  if (terms.empty()) throw ContractViolation("dominant_term: report has no terms");
  return *std::max_element(terms.begin(), terms.end(),
                           [](const BoundTerm& a, const BoundTerm& b) { return a.value < b.value; });
}

std::int64_t tolerant_floor(double x) {
  if (!std::isfinite(x)) throw ParameterError("bound is not finite");
  return static_cast<std::int64_t>(std::floor(x + 1e-9 * std::max(1.0, std::abs(x))));
}

std::int64_t k_subgrad(double M, double delta, double eps_bar) {
  require_positive(eps_bar, "eps_bar");
  if (M < 0.0 || delta < 0.0) throw ParameterError("k_subgrad: M and delta must be nonnegative");
  const double r = M * delta / eps_bar;
  return tolerant_floor(r * r);
}

std::int64_t k_accel(double L, double delta, double eps_bar) {
  require_positive(eps_bar, "eps_bar");
  if (L < 0.0 || delta < 0.0) throw ParameterError("k_accel: L and delta must be nonnegative");
  return tolerant_floor(2.0 * delta * std::sqrt(L / eps_bar));
}

std::int64_t k_univ(double M_nu, double nu, double delta, double eps_bar) {
  require_positive(eps_bar, "eps_bar");
  require_nu(nu);
  if (M_nu < 0.0 || delta < 0.0) throw ParameterError("k_univ: M_nu and delta must be nonnegative");
  const double base = M_nu * std::pow(delta, 1.0 + nu) / eps_bar;
  return tolerant_floor(std::pow(2.0, univ_exponent(nu)) * std::pow(base, 2.0 / (1.0 + 3.0 * nu)));
}

double c_const(double delta, double eps, double nu, double M_nu, double L0) {
  require_positive(delta, "delta");
  require_positive(eps, "eps");
  require_positive(M_nu, "M_nu");
  require_positive(L0, "L0");
  require_nu(nu);
  const double q = 1.0 + 3.0 * nu;
  return 4.0 + (1.0 - nu) / (2.0 * q) * std::log2(delta) + 3.0 * (1.0 - nu) / q * std::log2(2.0 / eps) +
         4.0 / q * std::log2(M_nu) - 2.0 * std::log2(L0);
}

double t_univ(double M_nu, double nu, double delta, double eps_bar, double L0) {
  require_positive(delta, "delta");
  require_positive(M_nu, "M_nu");
  require_positive(L0, "L0");
  const double q = 1.0 + 3.0 * nu;
  const auto k = k_univ(M_nu, nu, delta, eps_bar);
  return 4.0 * (static_cast<double>(k) + 1.0) + (1.0 - nu) / (2.0 * q) * std::log2(delta) +
         3.0 * (1.0 - nu) / q * std::log2(1.0 / eps_bar) + 4.0 / q * std::log2(M_nu) - 2.0 * std::log2(L0);
}

double univ_call_bound(double M_nu, double nu, double delta, double eps_bar, double L0, std::int64_t k) {
  require_positive(delta, "delta");
  require_positive(eps_bar, "eps_bar");
  require_positive(M_nu, "M_nu");
  require_positive(L0, "L0");
  require_nu(nu);
  const double q = 1.0 + 3.0 * nu;
  return 4.0 * (static_cast<double>(k) + 1.0) + 2.0 * (1.0 - nu) / q * std::log2(delta) +
         3.0 * (1.0 - nu) / q * std::log2(1.0 / eps_bar) + 4.0 / q * std::log2(M_nu) - 2.0 * std::log2(L0);
}

double l0_limit(double nu, double M_nu, double eps_bar) {
  require_nu(nu);
  require_positive(eps_bar, "eps_bar");
  if (nu == 1.0) return M_nu;
  const double r = (1.0 - nu) / (1.0 + nu);
  return std::pow(r / eps_bar, r) * std::pow(M_nu, 2.0 / (1.0 + nu));
}

bool l0_admissible(double L0, double nu, double M_nu, double eps_bar) {
  return L0 > 0.0 && L0 <= l0_limit(nu, M_nu, eps_bar);
}

int default_N(double eps) {
  require_positive(eps, "eps");
  return std::max(-1, static_cast<int>(std::ceil(std::log2(1.0 / eps))));
}

int n_bar(double gap, double eps) {
  require_positive(eps, "eps");
  if (!(gap >= 0.0) || !std::isfinite(gap)) throw ParameterError("n_bar: gap must be nonnegative");
  int n = -1;
  while (!(gap < 5.0 * std::ldexp(eps, n))) ++n;
  return n;
}

RateFunction iteration_bound(const GrowthMetadata& m, const MethodKind& kind) {
  const char* what = "iteration_bound";
  switch (kind.tag) {
    case MethodTag::subgrad: {
      const double M = require_constant(m.lipschitz, "M", what);
      return [M](double delta, double eps_bar) { return static_cast<double>(k_subgrad(M, delta, eps_bar)); };
    }
    case MethodTag::accel: {
      const double L = require_constant(m.smoothness, "L", what);
      return [L](double delta, double eps_bar) { return static_cast<double>(k_accel(L, delta, eps_bar)); };
    }
    case MethodTag::univ: {
      const double M = require_constant(m.holder_constant, "M_nu", what);
      const double nu = require_constant(m.holder_exponent, "nu", what);
      return [M, nu](double delta, double eps_bar) {
        return static_cast<double>(k_univ(M, nu, delta, eps_bar));
      };
    }
  }
  throw ContractViolation("iteration_bound: unknown method");
}

RateFunction time_bound(const GrowthMetadata& m, const MethodKind& kind) {
  const char* what = "time_bound";
  switch (kind.tag) {
    case MethodTag::subgrad:
      return iteration_bound(m, kind);
    case MethodTag::accel: {
      // Two oracle calls per accelerated iteration.
      auto k = iteration_bound(m, kind);
      return [k](double delta, double eps_bar) { return 2.0 * k(delta, eps_bar); };
    }
    case MethodTag::univ: {
      const double M = require_constant(m.holder_constant, "M_nu", what);
      const double nu = require_constant(m.holder_exponent, "nu", what);
      const double L0 = kind.L0;
      return [M, nu, L0](double delta, double eps_bar) { return t_univ(M, nu, delta, eps_bar, L0); };
    }
  }
  throw ContractViolation("time_bound: unknown method");
}

BoundReport bound_sync_theorem(const GrowthMetadata& m, double f_x0, double eps, int N,
                               const RateFunction& method_k) {
  const char* what = "bound_sync_theorem";
  const Regime r = select_regime(m, f_x0, eps, N, what);
  BoundReport rep;
  rep.which = "sync-theorem";
  rep.regime = r.regime;
  rep.n_bar = r.top;
  rep.add("periods", r.top + 1.0);
  for (int n = -1; n <= r.top; ++n) {
    rep.add(n_label("3K", n), 3.0 * method_k(d_n(m, f_x0, eps, n), std::ldexp(eps, n)));
  }
  if (r.regime == BoundRegime::add_on) rep.add("add-on", method_k(dist_of(m, what), std::ldexp(eps, N)));
  return rep;
}

BoundReport bound_cor_subgrad(const GrowthMetadata& m, double f_x0, double eps, int N) {
  const char* what = "bound_cor_subgrad";
  if (m.d < 1.0) throw ParameterError("bound_cor_subgrad: d must be >= 1");
  const double M = require_constant(m.lipschitz, "M", what);
  const Regime r = select_regime(m, f_x0, eps, N, what);
  BoundReport rep;
  rep.which = "cor-subgrad";
  rep.regime = r.regime;
  rep.n_bar = r.top;
  const double nb = r.top;
  rep.add("periods", nb + 1.0);
  if (m.d == 1.0) {
    const double c = 5.0 * M / m.mu;
    rep.add("growth", 3.0 * (nb + 2.0) * c * c);
  } else {
    const double e = 1.0 - 1.0 / m.d;
    const double c = std::pow(5.0, 1.0 / m.d) * M / (std::pow(m.mu, 1.0 / m.d) * std::pow(eps, e));
    rep.add("growth", 3.0 * c * c * std::min(std::pow(16.0, e) / (std::pow(4.0, e) - 1.0), nb + 5.0));
  }
  if (r.regime == BoundRegime::add_on) {
    const double c = M * dist_of(m, what) / std::ldexp(eps, N);
    rep.add("add-on", c * c);
  }
  return rep;
}

BoundReport bound_cor_accel(const GrowthMetadata& m, double f_x0, double eps, int N) {
  const char* what = "bound_cor_accel";
  if (m.d < 2.0) throw ParameterError("bound_cor_accel: smooth growth needs d >= 2");
  const double L = require_constant(m.smoothness, "L", what);
  const Regime r = select_regime(m, f_x0, eps, N, what);
  BoundReport rep;
  rep.which = "cor-accel";
  rep.regime = r.regime;
  rep.n_bar = r.top;
  const double nb = r.top;
  rep.add("periods", nb + 1.0);
  if (m.d == 2.0) {
    rep.add("growth", 6.0 * (nb + 2.0) * std::sqrt(5.0 * L / m.mu));
  } else {
    const double e = 0.5 - 1.0 / m.d;
    const double c = 6.0 * std::pow(5.0 / m.mu, 1.0 / m.d) * std::sqrt(L) / std::pow(eps, e);
    rep.add("growth", c * std::min(std::pow(4.0, e) / (std::pow(2.0, e) - 1.0), nb + 3.0));
  }
  if (r.regime == BoundRegime::add_on) {
    rep.add("add-on", 2.0 * dist_of(m, what) * std::sqrt(L / std::ldexp(eps, N)));
  }
  return rep;
}

BoundReport bound_async_theorem(const GrowthMetadata& m, double f_x0, double eps, int N,
                                double tau_transit, double tau_pause, const RateFunction& method_t) {
  const char* what = "bound_async_theorem";
  if (tau_transit < 0.0 || tau_pause < 0.0) throw ParameterError("delays must be nonnegative");
  const Regime r = select_regime(m, f_x0, eps, N, what);
  BoundReport rep;
  rep.which = "async-theorem";
  rep.regime = r.regime;
  rep.n_bar = r.top;
  rep.add("transit", (r.top + 1.0) * tau_transit);
  rep.add("pause", 2.0 * (r.top + 2.0) * tau_pause);
  for (int n = -1; n <= r.top; ++n) {
    rep.add(n_label("3T", n), 3.0 * method_t(d_n(m, f_x0, eps, n), std::ldexp(eps, n)));
  }
  if (r.regime == BoundRegime::add_on) rep.add("add-on", method_t(dist_of(m, what), std::ldexp(eps, N)));
  return rep;
}

BoundReport bound_cor_univ(const GrowthMetadata& m, double f_x0, double eps, int N, double tau_transit,
                           double tau_pause, double L0) {
  const char* what = "bound_cor_univ";
  const double M = require_constant(m.holder_constant, "M_nu", what);
  const double nu = require_constant(m.holder_exponent, "nu", what);
  if (m.d < 1.0 + nu - 1e-12) throw ParameterError("bound_cor_univ: needs d >= 1 + nu");
  if (tau_transit < 0.0 || tau_pause < 0.0) throw ParameterError("delays must be nonnegative");
  const Regime r = select_regime(m, f_x0, eps, N, what);
  BoundReport rep;
  rep.which = "cor-univ";
  rep.regime = r.regime;
  rep.n_bar = r.top;
  const double nb = r.top;
  const double q = 1.0 + 3.0 * nu;
  const double two_pow = std::pow(2.0, univ_exponent(nu));
  rep.add("transit", (nb + 1.0) * tau_transit);
  rep.add("pause", 2.0 * (nb + 2.0) * tau_pause);
  rep.add("C", 3.0 * (nb + 2.0) * c_const(growth_envelope(m, f_x0), eps, nu, M, L0));
  if (std::abs(m.d - (1.0 + nu)) <= 1e-12) {
    rep.add("growth", 12.0 * (nb + 2.0) * two_pow * std::pow(5.0 * M / m.mu, 2.0 / q));
  } else {
    const double e = (1.0 - (1.0 + nu) / m.d) * 2.0 / q;
    const double base = M * std::pow(5.0 / m.mu, (1.0 + nu) / m.d) / std::pow(eps, 1.0 - (1.0 + nu) / m.d);
    rep.add("growth", 12.0 * two_pow * std::pow(base, 2.0 / q) *
                          std::min(std::pow(4.0, e) / (std::pow(2.0, e) - 1.0), nb + 5.0));
  }
  if (r.regime == BoundRegime::add_on) {
    const double dist = dist_of(m, what);
    const double eps_n = std::ldexp(eps, N);
    rep.add("add-on", 4.0 * two_pow * std::pow(M * std::pow(dist, 1.0 + nu) / eps_n, 2.0 / q) +
                          c_const(dist, eps_n, nu, M, L0));
  }
  for (int n = -1; n <= N; ++n) {
    if (!l0_admissible(L0, nu, M, std::ldexp(eps, n))) {
      rep.assumptions_ok = false;
      rep.note = "L0 exceeds the admissible limit for some copy";
      break;
    }
  }
  return rep;
}

} // namespace parfom
