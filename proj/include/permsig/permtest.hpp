#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "permsig/validate.hpp"

namespace permsig {

/// Validation scheme producing the test statistic.
struct SchemeSpec {
  Scheme kind = Scheme::Rub;
  int k = 10;                               // folds, K-fold only
  double eta = 0.05;                        // bound confidence, RUB only
  BoundKind bound = BoundKind::Empirical;   // RUB only
};

/// How each replicate relabels the data.
enum class Relabel {
  Permute,      // shuffle the labels of a multi-condition dataset
  SplitGroups,  // split a single-condition dataset into two random halves
};

/// Permuted statistics T_pi. For K-fold every replicate contributes K values.
struct NullDistribution {
  Scheme scheme = Scheme::Rub;
  int replicates = 0;
  std::vector<double> statistics;
  std::vector<double> train_statistics;  // K-fold only, aligned with statistics
  std::vector<PermutationPlan> replicate_seeds;
  std::optional<double> bound;
};

struct NullOptions {
  Relabel relabel = Relabel::Permute;
  int workers = 1;
  int max_retries = 3;
};

NullDistribution null_distribution(const Learner& learner, const Dataset& d, int m,
                                   const SchemeSpec& scheme, std::uint64_t master_seed,
                                   const NullOptions& options = {});

/// (card{T_pi <= observed} + 1) / (M + 1)
double p_value(double observed, std::span<const double> null);
double p_value(double observed, const NullDistribution& null);

/// Monte-Carlo standard deviation sqrt(p (1 - p) / n).
double mc_stddev(double p, std::size_t n);

/// Self-inclusive rank p-values: p_m = card{T_pi <= T_pi,m} / M.
std::vector<double> omnibus_pvalues(std::span<const double> null);
std::vector<double> omnibus_pvalues(const NullDistribution& null);

/// card{p <= alpha} / M
double fwe_rate(std::span<const double> pvalues, double alpha);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
Histogram make_histogram(std::span<const double> values, int bins = 30, double lo = 0.0,
                         double hi = 1.0);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

/// Generalisation ratios over (training error, test error) pairs. Pairs with a
/// zero training error and a positive test error are only counted.
struct RatioSummary {
  double mean = 0.0;  // over finite ratios
  std::size_t finite_count = 0;
  std::size_t infinite_count = 0;
};
RatioSummary summarize_ratios(std::span<const double> train, std::span<const double> test);

struct StudyConfig {
  SchemeSpec scheme;
  int m = 0;  // 0 selects 1000 for resubstitution schemes, 100 for K-fold
  double alpha = 0.05;
  std::uint64_t master_seed = 0;
  int workers = 1;
  int observed_iterations = 20;

  int resolved_m() const;
  void validate() const;
};

struct StudyReport {
  std::string study;
  SchemeSpec scheme;
  int m = 0;
  double alpha = 0.05;
  std::optional<double> mu;

  std::vector<double> observed_values;
  Summary observed;
  NullDistribution null;
  Summary null_summary;
  Histogram histogram;

  double p_value = 1.0;
  double p_value_sd = 0.0;
  bool rejected = false;
  std::optional<double> fwe_rate;
  std::optional<double> fwe_rate_sd;

  std::optional<RatioSummary> observed_generalization;
  std::optional<RatioSummary> null_generalization;
};

/// Power assessment: observed statistic from row-shuffled iterations on the
/// true labels against a label-permutation null.
StudyReport power_study(const Learner& learner, const Dataset& d, const StudyConfig& config);

/// Type-I error control on a single-condition dataset: every replicate splits
/// the samples into two random halves; the Omnibus FWE rate is reported.
StudyReport type1_study(const Learner& learner, const Dataset& d, const StudyConfig& config);

/// Feature extraction fitted once on the unpermuted data; only the classifier
/// stage is refit inside the permutation loop. Dispatches to a type-I study
/// for single-condition data and a power study otherwise.
StudyReport alt_scheme_study(const PipelineSpec& spec, const Dataset& d, const StudyConfig& config);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// failure by index is rethrown after all workers finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace permsig
