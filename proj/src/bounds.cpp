#include "permsig/bounds.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "permsig/error.hpp"

namespace permsig {

namespace {

double log_choose(std::int64_t m, std::int64_t k) {
  return std::lgamma(static_cast<double>(m) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(m - k) + 1.0);
}

}  // namespace

void BoundSpec::validate() const {
  if (n < 2) throw ConfigError("bound needs n >= 2, got " + std::to_string(n));
  if (d < 1) throw ConfigError("bound needs d >= 1, got " + std::to_string(d));
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("bound needs eta in (0, 1)");
}

double log_binomial_sum(std::int64_t m, std::int64_t t) {
  if (m < 0 || t < 0 || t > m) {
    throw ConfigError("log_binomial_sum needs 0 <= t <= m, got m=" + std::to_string(m) +
                      " t=" + std::to_string(t));
  }
  // Log-sum-exp around the largest term; C(m, k) peaks at k = min(t, m/2).
  const std::int64_t peak = std::min(t, m / 2);
  const double top = log_choose(m, peak);
  double acc = 0.0;
  for (std::int64_t k = 0; k <= t; ++k) acc += std::exp(log_choose(m, k) - top);
  return top + std::log(acc);
}

double empirical_bound(const BoundSpec& spec) {
  spec.validate();
  const double log_arg = std::log(2.0) + log_binomial_sum(spec.n - 1, std::min(spec.d - 1, spec.n - 1)) -
                         std::log(spec.eta);
  if (!(log_arg > 0.0)) throw NumericalError("empirical bound argument is not above 1");
  return std::sqrt(log_arg / (2.0 * static_cast<double>(spec.n)));
}

double vapnik_bound(const BoundSpec& spec) {
  spec.validate();
  const double h = static_cast<double>(spec.d + 1);
  const double n = static_cast<double>(spec.n);
  if (h >= 2.0 * n) {
    throw ConfigError("Vapnik bound needs VC dimension h = d + 1 below 2n");
  }
  const double numerator = h * (std::log(2.0 * n / h) + 1.0) - std::log(spec.eta / 4.0);
  return std::sqrt(numerator / n);
}

double upper_bound(const BoundSpec& spec) {
  return spec.kind == BoundKind::Empirical ? empirical_bound(spec) : vapnik_bound(spec);
}

}  // namespace permsig
