#pragma once

#include <cstdint>

namespace permsig {

enum class BoundKind { Empirical, Vapnik };

/// Inputs of a generalisation bound for a linear classifier trained on n
/// samples with d input features, holding with confidence 1 - eta.
struct BoundSpec {
  std::int64_t n = 0;
  std::int64_t d = 1;
  double eta = 0.05;
  BoundKind kind = BoundKind::Empirical;

  void validate() const;
};

/// ln( sum_{k=0}^{t} C(m, k) ), evaluated in the log domain.
double log_binomial_sum(std::int64_t m, std::int64_t t);

/// sqrt( ln( 2 * sum_{k<d} C(n-1, k) / eta ) / (2n) )
double empirical_bound(const BoundSpec& spec);

/// Vapnik's VC bound with h = d + 1:
/// sqrt( (h (ln(2n/h) + 1) - ln(eta/4)) / n )
double vapnik_bound(const BoundSpec& spec);

/// Dispatches on spec.kind.
double upper_bound(const BoundSpec& spec);

}  // namespace permsig
