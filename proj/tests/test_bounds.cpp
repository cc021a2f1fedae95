#include <doctest.h>

#include <chrono>
#include <cmath>

#include "permsig/bounds.hpp"
#include "permsig/error.hpp"

using namespace permsig;

namespace {

double emp(std::int64_t n, std::int64_t d, double eta = 0.05) {
  return empirical_bound({n, d, eta, BoundKind::Empirical});
}
double vc(std::int64_t n, std::int64_t d, double eta = 0.05) {
  return vapnik_bound({n, d, eta, BoundKind::Vapnik});
}

}  // namespace

TEST_CASE("log_binomial_sum") {
  CHECK(log_binomial_sum(416, 0) == doctest::Approx(0.0));
  // 1 + 4 + 6
  CHECK(log_binomial_sum(4, 2) == doctest::Approx(std::log(11.0)).epsilon(1e-14));
  CHECK(log_binomial_sum(20, 20) == doctest::Approx(20 * std::log(2.0)).epsilon(1e-13));
  // exact integer enumeration for a mid-size case
  double exact = 0.0;
  double term = 1.0;
  for (int k = 0; k <= 7; ++k) {
    exact += term;
    term = term * (30 - k) / (k + 1);
  }
  CHECK(log_binomial_sum(30, 7) == doctest::Approx(std::log(exact)).epsilon(1e-13));
  CHECK(std::isfinite(log_binomial_sum(1000000, 500000)));
  CHECK_THROWS_AS(log_binomial_sum(4, 5), ConfigError);
}

TEST_CASE("empirical bound matches reference values") {
  const std::pair<std::int64_t, double> table[] = {
      {417, 0.0665}, {229, 0.0897}, {400, 0.0679}, {200, 0.0960},
      {100, 0.1358}, {246, 0.0866}, {123, 0.1225}};
  for (const auto& [n, mu] : table) {
    CAPTURE(n);
    CHECK(std::abs(emp(n, 1) - mu) <= 5e-4);
  }
}

TEST_CASE("empirical bound closed form at d = 1") {
  for (std::int64_t n : {2, 17, 417, 5000}) {
    for (double eta : {0.01, 0.05, 0.5}) {
      CHECK(std::abs(emp(n, 1, eta) - std::sqrt(std::log(2.0 / eta) / (2.0 * n))) < 1e-12);
    }
  }
}

TEST_CASE("Vapnik bound") {
  CHECK(std::abs(vc(417, 1) - 0.2103) <= 5e-4);
  CHECK(vc(417, 1) > emp(417, 1));
  CHECK_THROWS_AS(vc(2, 3), ConfigError);
  CHECK_THROWS_AS(emp(1, 1), ConfigError);
  CHECK_THROWS_AS(emp(10, 1, 1.0), ConfigError);
}

TEST_CASE("bounds are monotone over the grid") {
  for (std::int64_t d = 1; d <= 20; ++d) {
    double prev_e = INFINITY;
    double prev_v = INFINITY;
    for (std::int64_t n = 50; n <= 5000; n += 50) {
      const double e = emp(n, d);
      const double v = vc(n, d);
      CHECK(e < prev_e);
      CHECK(v < prev_v);
      if (d == 1) CHECK(e <= v);
      if (d > 1) {
        CHECK(e > emp(n, d - 1));
        CHECK(v > vc(n, d - 1));
      }
      prev_e = e;
      prev_v = v;
    }
  }
}

TEST_CASE("large n at large d stays finite and fast") {
  const auto start = std::chrono::steady_clock::now();
  const double mu = emp(417, 200);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(std::isfinite(mu));
  CHECK(elapsed < std::chrono::milliseconds(1));
}
