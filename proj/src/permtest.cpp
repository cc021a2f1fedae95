#include "permsig/permtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "permsig/error.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kRetrySalt = 0x5E7B000000000000ULL;
constexpr std::uint64_t kObservedSalt = 0x0B5E000000000000ULL;
constexpr std::uint64_t kTrimSalt = 0x7819000000000000ULL;
constexpr std::uint64_t kAltSalt = 0xA170000000000000ULL;

struct ReplicateStats {
  std::vector<double> test;
  std::vector<double> train;
};

// Statistics of one already-relabelled dataset. Throws on any fit failure.
ReplicateStats replicate_statistics(const Learner& learner, const Dataset& d,
                                    const SchemeSpec& scheme, const PermutationPlan& plan,
                                    std::optional<double> mu) {
  ReplicateStats out;
  switch (scheme.kind) {
    case Scheme::Resub:
      out.test.push_back(resub_error(learner, d, plan).value);
      break;
    case Scheme::Rub: {
      const auto resub = resub_error(learner, d, plan);
      out.test.push_back(resub.value + *mu);
      break;
    }
    case Scheme::KFold: {
      const auto folds = stratified_folds(d, scheme.k, plan);
      const auto result = kfold_errors(learner, d, folds, plan);
      if (!result.failures.empty()) {
        throw NumericalError("fold " + std::to_string(result.failures.front().fold) +
                             " failed: " + result.failures.front().message);
      }
      for (const auto& e : result.test_errors) out.test.push_back(e.value);
      for (const auto& e : result.train_errors) out.train.push_back(e.value);
      break;
    }
  }
  return out;
}

Dataset relabel(const Dataset& d, Relabel mode, const PermutationPlan& plan) {
  return mode == Relabel::Permute ? permute_labels(d, plan) : split_null_groups(d, plan);
}

std::optional<double> scheme_bound(const Learner& learner, const Dataset& d,
                                   const SchemeSpec& scheme) {
  if (scheme.kind != Scheme::Rub) return std::nullopt;
  BoundSpec spec;
  spec.n = static_cast<std::int64_t>(d.rows());
  spec.d = learner.classifier_dimension(static_cast<int>(d.cols()));
  spec.eta = scheme.eta;
  spec.kind = scheme.bound;
  return upper_bound(spec);
}

struct Observed {
  std::vector<double> test;
  std::vector<double> train;
};

// Statistic on the unpermuted labels, repeated over seeded iterations. For a
// two-or-more-condition dataset rows are shuffled; for a single condition a
// fresh random split is drawn each iteration.
Observed observed_statistics(const Learner& learner, const Dataset& d, const StudyConfig& config,
                             Relabel mode, std::optional<double> mu) {
  const auto iterations = static_cast<std::size_t>(config.observed_iterations);
  std::vector<ReplicateStats> per_iter(iterations);
  const std::uint64_t seed = combine_seed(config.master_seed, kObservedSalt);
  parallel_for(iterations, config.workers, [&](std::size_t i) {
    const PermutationPlan plan{seed, i};
    const Dataset di = mode == Relabel::Permute ? shuffle_rows(d, plan) : split_null_groups(d, plan);
    try {
      per_iter[i] = replicate_statistics(learner, di, config.scheme, plan, mu);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& ex) {
      throw NumericalError("observed iteration " + std::to_string(i) + ": " + ex.what());
    }
  });
  Observed out;
  for (auto& r : per_iter) {
    out.test.insert(out.test.end(), r.test.begin(), r.test.end());
    out.train.insert(out.train.end(), r.train.begin(), r.train.end());
  }
  return out;
}

StudyReport finish_report(std::string study, const StudyConfig& config, std::optional<double> mu,
                          Observed observed, NullDistribution null) {
  StudyReport report;
  report.study = std::move(study);
  report.scheme = config.scheme;
  report.m = null.replicates;
  report.alpha = config.alpha;
  report.mu = mu;
  report.observed_values = std::move(observed.test);
  report.observed = summarize(report.observed_values);
  report.null_summary = summarize(null.statistics);
  report.histogram = make_histogram(null.statistics);
  report.p_value = p_value(report.observed.mean, null);
  report.p_value_sd = mc_stddev(report.p_value, null.statistics.size());
  report.rejected = report.p_value <= config.alpha;
  if (config.scheme.kind == Scheme::KFold) {
    // observed train/test pairs are aligned with observed_values
    report.observed_generalization = summarize_ratios(observed.train, report.observed_values);
    report.null_generalization = summarize_ratios(null.train_statistics, null.statistics);
  }
  report.null = std::move(null);
  return report;
}

}  // namespace

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::size_t failed_index = count;
  std::exception_ptr failure;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      {
        std::lock_guard lock(guard);
        if (failure && failed_index < i) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(guard);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t n_threads = std::min(threads, count);
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

NullDistribution null_distribution(const Learner& learner, const Dataset& d, int m,
                                   const SchemeSpec& scheme, std::uint64_t master_seed,
                                   const NullOptions& options) {
  if (m < 1) throw ConfigError("permutation count m must be at least 1");
  const auto mu = scheme_bound(learner, d, scheme);

  const auto count = static_cast<std::size_t>(m);
  std::vector<ReplicateStats> stats(count);
  std::vector<PermutationPlan> seeds(count);
  parallel_for(count, options.workers, [&](std::size_t r) {
    std::string last_error;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      const std::uint64_t seed =
          attempt == 0 ? master_seed
                       : combine_seed(master_seed, kRetrySalt + static_cast<std::uint64_t>(attempt));
      const PermutationPlan plan{seed, r};
      try {
        const Dataset permuted = relabel(d, options.relabel, plan);
        stats[r] = replicate_statistics(learner, permuted, scheme, plan, mu);
        seeds[r] = plan;
        return;
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& ex) {
        last_error = ex.what();
      }
    }
    throw NumericalError("replicate " + std::to_string(r) + " failed after " +
                         std::to_string(options.max_retries) + " retries: " + last_error);
  });

  NullDistribution null;
  null.scheme = scheme.kind;
  null.replicates = m;
  null.bound = mu;
  null.replicate_seeds = std::move(seeds);
  for (auto& s : stats) {
    null.statistics.insert(null.statistics.end(), s.test.begin(), s.test.end());
    null.train_statistics.insert(null.train_statistics.end(), s.train.begin(), s.train.end());
  }
  return null;
}

double p_value(double observed, std::span<const double> null) {
  if (null.empty()) throw ConfigError("p-value needs a non-empty null distribution");
  const auto below = std::count_if(null.begin(), null.end(), [&](double t) { return t <= observed; });
  return static_cast<double>(below + 1) / static_cast<double>(null.size() + 1);
}

double p_value(double observed, const NullDistribution& null) {
  return p_value(observed, std::span<const double>(null.statistics));
}

double mc_stddev(double p, std::size_t n) {
  if (!(p >= 0.0 && p <= 1.0) || n == 0) throw ConfigError("mc_stddev needs p in [0,1] and n >= 1");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::vector<double> omnibus_pvalues(std::span<const double> null) {
  if (null.empty()) throw ConfigError("Omnibus test needs a non-empty null distribution");
  std::vector<double> sorted(null.begin(), null.end());
  std::sort(sorted.begin(), sorted.end());
  const auto total = static_cast<double>(null.size());
  std::vector<double> p(null.size());
  for (std::size_t i = 0; i < null.size(); ++i) {
    const auto at_or_below = std::upper_bound(sorted.begin(), sorted.end(), null[i]) - sorted.begin();
    p[i] = static_cast<double>(at_or_below) / total;
  }
  return p;
}

std::vector<double> omnibus_pvalues(const NullDistribution& null) {
  return omnibus_pvalues(std::span<const double>(null.statistics));
}

double fwe_rate(std::span<const double> pvalues, double alpha) {
  if (pvalues.empty()) throw ConfigError("FWE rate needs at least one p-value");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  const auto hits = std::count_if(pvalues.begin(), pvalues.end(), [&](double p) { return p <= alpha; });
  return static_cast<double>(hits) / static_cast<double>(pvalues.size());
}

Histogram make_histogram(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("histogram needs bins >= 1 and hi > lo");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * bins));
    b = std::clamp<long>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

RatioSummary summarize_ratios(std::span<const double> train, std::span<const double> test) {
  if (train.size() != test.size()) throw DataError("training and test error counts differ");
  RatioSummary s;
  double sum = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto g = generalization_ratio(train[i], test[i]);
    if (g.finite()) {
      sum += g.ratio;
      ++s.finite_count;
    } else {
      ++s.infinite_count;
    }
  }
  if (s.finite_count > 0) s.mean = sum / static_cast<double>(s.finite_count);
  return s;
}

int StudyConfig::resolved_m() const {
  if (m > 0) return m;
  return scheme.kind == Scheme::KFold ? 100 : 1000;
}

void StudyConfig::validate() const {
  if (m < 0) throw ConfigError("m must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(scheme.eta > 0.0 && scheme.eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  if (scheme.kind == Scheme::KFold && scheme.k < 2) throw ConfigError("k must be at least 2");
  if (observed_iterations < 1) throw ConfigError("observed_iterations must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

StudyReport power_study(const Learner& learner, const Dataset& d, const StudyConfig& config) {
  config.validate();
  if (d.class_count < 2) throw DataError("power study needs at least 2 classes");
  const auto mu = scheme_bound(learner, d, config.scheme);
  auto observed = observed_statistics(learner, d, config, Relabel::Permute, mu);
  NullOptions options;
  options.relabel = Relabel::Permute;
  options.workers = config.workers;
  auto null = null_distribution(learner, d, config.resolved_m(), config.scheme, config.master_seed, options);
  return finish_report("power", config, mu, std::move(observed), std::move(null));
}

StudyReport type1_study(const Learner& learner, const Dataset& d, const StudyConfig& config) {
  config.validate();
  if (d.class_count != 1) throw DataError("type-I study needs a single-condition dataset");
  const Dataset even = trim_to_even(d, {combine_seed(config.master_seed, kTrimSalt), 0});
  const auto mu = scheme_bound(learner, even, config.scheme);
  auto observed = observed_statistics(learner, even, config, Relabel::SplitGroups, mu);
  NullOptions options;
  options.relabel = Relabel::SplitGroups;
  options.workers = config.workers;
  auto null = null_distribution(learner, even, config.resolved_m(), config.scheme,
                                config.master_seed, options);
  auto report = finish_report("type1", config, mu, std::move(observed), std::move(null));
  const auto pvalues = omnibus_pvalues(report.null);
  report.fwe_rate = fwe_rate(pvalues, config.alpha);
  report.fwe_rate_sd = mc_stddev(*report.fwe_rate, pvalues.size());
  return report;
}

StudyReport alt_scheme_study(const PipelineSpec& spec, const Dataset& d, const StudyConfig& config) {
  config.validate();
  const Dataset base =
      d.class_count == 1 ? trim_to_even(d, {combine_seed(config.master_seed, kTrimSalt), 0}) : d;
  const auto split = split_for_alt_scheme(spec, base, {combine_seed(config.master_seed, kAltSalt), 0});
  const Dataset reduced(split.extractor.transform(base.features), base.labels, base.class_count);
  const PipelineLearner learner(split.classifier_stage);
  auto report = base.class_count == 1 ? type1_study(learner, reduced, config)
                                      : power_study(learner, reduced, config);
  report.study = "alt-" + report.study;
  return report;
}

}  // namespace permsig
