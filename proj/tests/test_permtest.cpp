#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>

#include "permsig/error.hpp"
#include "permsig/permtest.hpp"

using namespace permsig;

namespace {

class FixedModel final : public Model {
 public:
  explicit FixedModel(std::vector<int> p) : p_(std::move(p)) {}
  std::vector<int> predict(const Matrix& x) const override {
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = p_[i % p_.size()];
    return out;
  }

 private:
  std::vector<int> p_;
};

// Predicts a fixed pattern; fails whenever `should_fail(plan)` holds.
class ScriptedLearner final : public Learner {
 public:
  std::function<bool(const PermutationPlan&)> should_fail = [](const PermutationPlan&) { return false; };
  bool config_error = false;
  mutable std::atomic<int> calls{0};

  std::unique_ptr<Model> fit(const Matrix&, std::span<const int> labels, int,
                             const PermutationPlan& plan) const override {
    ++calls;
    if (should_fail(plan)) {
      if (config_error) throw ConfigError("bad setting");
      throw NumericalError("did not converge");
    }
    return std::make_unique<FixedModel>(std::vector<int>(labels.begin(), labels.begin() + 1));
  }
  int classifier_dimension(int) const override { return 1; }
};

Dataset noise(int n_per_class, int dim, std::uint64_t seed) {
  return synth_effect(n_per_class, dim, 2, 0.0, {seed, 0});
}

}  // namespace

TEST_CASE("p-value arithmetic") {
  std::vector<double> null(1000, 0.5);
  CHECK(p_value(0.1, null) == doctest::Approx(1.0 / 1001.0));
  CHECK(p_value(0.5, null) == 1.0);
  CHECK(p_value(0.9, null) == 1.0);
  const std::vector<double> small{0.1, 0.2, 0.3, 0.4};
  CHECK(p_value(0.2, small) == doctest::Approx(3.0 / 5.0));
  CHECK(p_value(0.0, small) == doctest::Approx(1.0 / 5.0));
  CHECK_THROWS_AS(p_value(0.0, std::span<const double>{}), ConfigError);

  // Never below 1 / (M + 1) and non-decreasing in the observed statistic.
  double prev = 0.0;
  for (double t = -0.1; t <= 1.1; t += 0.05) {
    const double p = p_value(t, small);
    CHECK(p >= 1.0 / 5.0);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("Monte-Carlo standard deviation") {
  CHECK(mc_stddev(0.0010, 1000) == doctest::Approx(0.000999).epsilon(1e-3));
  CHECK(mc_stddev(0.0440, 1000) == doctest::Approx(0.0065).epsilon(5e-3));
  CHECK(mc_stddev(0.5, 100) == doctest::Approx(0.05));
  CHECK(mc_stddev(1.0, 10) == 0.0);
  CHECK_THROWS_AS(mc_stddev(0.5, 0), ConfigError);
}

TEST_CASE("Omnibus p-values and FWE rate") {
  const std::vector<double> null{0.3, 0.1, 0.4, 0.2};
  const auto p = omnibus_pvalues(null);
  CHECK(p == std::vector<double>{0.75, 0.25, 1.0, 0.5});
  CHECK(fwe_rate(p, 0.25) == doctest::Approx(0.25));
  CHECK(fwe_rate(p, 0.5) == doctest::Approx(0.5));
  CHECK(fwe_rate(p, 1.0) == 1.0);

  const std::vector<double> ties{0.5, 0.5, 0.5};
  CHECK(omnibus_pvalues(ties) == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(fwe_rate(omnibus_pvalues(ties), 0.05) == 0.0);

  // Distinct values give exactly floor(alpha M) rejections.
  std::vector<double> spread(200);
  for (int i = 0; i < 200; ++i) spread[i] = (i * 37 % 200) / 200.0;
  CHECK(fwe_rate(omnibus_pvalues(spread), 0.05) == doctest::Approx(0.05));
}

TEST_CASE("histogram and summaries") {
  const std::vector<double> v{-0.2, 0.0, 0.01, 0.5, 0.99, 1.0, 1.3};
  const auto h = make_histogram(v);
  REQUIRE(h.edges.size() == 31);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 1.0);
  CHECK(h.counts.front() == 3);
  CHECK(h.counts[15] == 1);
  CHECK(h.counts.back() == 3);

  const auto s = summarize(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));

  const auto r = summarize_ratios(std::vector<double>{0.1, 0.0, 0.0}, std::vector<double>{0.2, 0.1, 0.0});
  CHECK(r.finite_count == 2);
  CHECK(r.infinite_count == 1);
  CHECK(r.mean == doctest::Approx(0.5));
}

TEST_CASE("null distribution sizes and values") {
  const Dataset d = noise(50, 1, 3);
  const PipelineLearner learner{PipelineSpec{}};

  SUBCASE("a single replicate") {
    const auto null = null_distribution(learner, d, 1, {}, 7);
    CHECK(null.statistics.size() == 1);
    CHECK(null.replicate_seeds.size() == 1);
    CHECK(p_value(0.0, null) == doctest::Approx(0.5));
  }
  SUBCASE("K-fold contributes every fold") {
    SchemeSpec kfold;
    kfold.kind = Scheme::KFold;
    const auto null = null_distribution(learner, d, 100, kfold, 7);
    CHECK(null.statistics.size() == 1000);
    CHECK(null.train_statistics.size() == 1000);
    CHECK(!null.bound.has_value());
    const auto s = summarize(null.statistics);
    CHECK(std::abs(s.mean - 0.5) < 0.06);
  }
  SUBCASE("RUB null sits near chance plus the bound") {
    const auto null = null_distribution(learner, d, 200, {}, 7);
    REQUIRE(null.bound.has_value());
    CHECK(*null.bound == doctest::Approx(empirical_bound({100, 1, 0.05, BoundKind::Empirical})));
    const auto s = summarize(null.statistics);
    CHECK(s.mean - *null.bound > 0.40);
    CHECK(s.mean - *null.bound <= 0.50);
    for (double t : null.statistics) CHECK(t >= *null.bound);
  }
}

TEST_CASE("null distribution is independent of the worker count") {
  const Dataset d = noise(30, 3, 5);
  const PipelineLearner learner{PipelineSpec{}};
  SchemeSpec kfold;
  kfold.kind = Scheme::KFold;
  kfold.k = 5;
  NullOptions one;
  NullOptions four;
  four.workers = 4;
  const auto a = null_distribution(learner, d, 40, kfold, 11, one);
  const auto b = null_distribution(learner, d, 40, kfold, 11, four);
  CHECK(a.statistics == b.statistics);
  CHECK(a.train_statistics == b.train_statistics);
  CHECK(a.replicate_seeds == b.replicate_seeds);
  CHECK(null_distribution(learner, d, 40, kfold, 12, one).statistics != a.statistics);
}

TEST_CASE("failing replicates are retried with fresh seeds") {
  const Dataset d = noise(10, 2, 1);
  SUBCASE("transient failure") {
    ScriptedLearner learner;
    learner.should_fail = [](const PermutationPlan& p) { return p.master_seed == 42 && p.replicate_index % 2 == 1; };
    const auto null = null_distribution(learner, d, 6, {}, 42);
    CHECK(null.statistics.size() == 6);
    CHECK(null.replicate_seeds[0].master_seed == 42);
    CHECK(null.replicate_seeds[1].master_seed != 42);
    CHECK(null.replicate_seeds[1].replicate_index == 1);
  }
  SUBCASE("persistent failure aborts naming the replicate") {
    ScriptedLearner learner;
    learner.should_fail = [](const PermutationPlan& p) { return p.replicate_index == 2; };
    CHECK_THROWS_WITH_AS(null_distribution(learner, d, 5, {}, 42), doctest::Contains("replicate 2"),
                         NumericalError);
  }
  SUBCASE("configuration errors are not retried") {
    ScriptedLearner learner;
    learner.config_error = true;
    learner.should_fail = [](const PermutationPlan&) { return true; };
    CHECK_THROWS_AS(null_distribution(learner, d, 3, {}, 42), ConfigError);
    CHECK(learner.calls.load() == 1);
  }
  CHECK_THROWS_AS(null_distribution(ScriptedLearner(), d, 0, {}, 1), ConfigError);
}

TEST_CASE("parallel_for reports the lowest failing index") {
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] = 1; });
  CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_WITH(parallel_for(50, 4,
                                 [](std::size_t i) {
                                   if (i == 7 || i == 30) throw std::runtime_error(std::to_string(i));
                                 }),
                    "7");
}

TEST_CASE("studies") {
  StudyConfig cfg;
  cfg.m = 50;
  cfg.master_seed = 3;
  cfg.observed_iterations = 5;
  const PipelineLearner learner{PipelineSpec{}};

  SUBCASE("power study rejects a strong effect") {
    const Dataset d = synth_effect(30, 5, 2, 2.0, {3, 0});
    const auto r = power_study(learner, d, cfg);
    CHECK(r.study == "power");
    CHECK(r.observed_values.size() == 5);
    CHECK(r.p_value == doctest::Approx(1.0 / 51.0));
    CHECK(r.rejected);
    CHECK(r.mu.has_value());
    CHECK_THROWS_AS(type1_study(learner, d, cfg), DataError);
  }
  SUBCASE("type-I study reports an FWE rate") {
    const Dataset d = synth_one_condition(41, 4, {3, 0});
    const auto r = type1_study(learner, d, cfg);
    CHECK(r.study == "type1");
    REQUIRE(r.fwe_rate.has_value());
    CHECK(*r.fwe_rate <= cfg.alpha + 1e-12);
    CHECK(r.fwe_rate_sd.has_value());
    CHECK_THROWS_AS(power_study(learner, d, cfg), DataError);
  }
  SUBCASE("K-fold study reports generalization ratios") {
    cfg.scheme.kind = Scheme::KFold;
    cfg.scheme.k = 5;
    cfg.m = 10;
    const Dataset d = synth_effect(20, 3, 2, 1.0, {3, 0});
    const auto r = power_study(learner, d, cfg);
    CHECK(r.observed_values.size() == 25);
    CHECK(r.null.statistics.size() == 50);
    REQUIRE(r.observed_generalization.has_value());
    CHECK(r.observed_generalization->finite_count + r.observed_generalization->infinite_count == 25);
    CHECK(!r.mu.has_value());
  }
  SUBCASE("alternative scheme keeps the extractor fixed") {
    const Dataset d = synth_effect(25, 6, 2, 1.5, {3, 0});
    const auto r = alt_scheme_study(PipelineSpec{}, d, cfg);
    CHECK(r.study == "alt-power");
    CHECK(r.rejected);
    const auto t = alt_scheme_study(PipelineSpec{}, synth_one_condition(30, 6, {3, 0}), cfg);
    CHECK(t.study == "alt-type1");
  }
  SUBCASE("invalid configuration") {
    cfg.alpha = 1.5;
    CHECK_THROWS_WITH_AS(power_study(learner, synth_effect(10, 2, 2, 1.0, {1, 0}), cfg),
                         doctest::Contains("alpha"), ConfigError);
  }
  CHECK(StudyConfig{}.resolved_m() == 1000);
  StudyConfig k;
  k.scheme.kind = Scheme::KFold;
  CHECK(k.resolved_m() == 100);
}
