#pragma once

#include <optional>
#include <string>
#include <vector>

#include "permsig/bounds.hpp"
#include "permsig/pipeline.hpp"

namespace permsig {

enum class Scheme { Resub, Rub, KFold };

const char* scheme_name(Scheme s);

/// One classification-error statistic and where it came from.
struct ErrorEstimate {
  double value = 0.0;
  Scheme scheme = Scheme::Resub;
  std::optional<int> fold;
  std::uint64_t iteration = 0;
  std::optional<double> bound;
  std::optional<double> resub;  // RUB only: the error the bound was added to
};

/// 1 - error; for RUB this is resubstitution accuracy minus the bound.
double accuracy(const ErrorEstimate& e);

/// Misclassified fraction.
double error_rate(std::span<const int> predicted, std::span<const int> truth);

/// Fits on every row and scores the same rows.
ErrorEstimate resub_error(const Learner& learner, const Dataset& d, const PermutationPlan& plan);

/// Adds the bound value to a resubstitution estimate.
ErrorEstimate rub_error(const ErrorEstimate& resub, const BoundSpec& spec);

struct FoldFailure {
  int fold = 0;
  std::string message;
};

struct KFoldResult {
  std::vector<ErrorEstimate> test_errors;   // one per successful fold, ordered by fold
  std::vector<ErrorEstimate> train_errors;  // matching training-set errors
  std::vector<FoldFailure> failures;
  /// Out-of-fold prediction for each sample; -1 where its fold failed.
  std::vector<int> predictions;
};

/// Refits the whole learner on each training part and scores the held-out
/// fold. Folds are independent estimates, not averaged.
KFoldResult kfold_errors(const Learner& learner, const Dataset& d, const FoldAssignment& folds,
                         const PermutationPlan& plan);

/// Overfitting diagnostic: ratio = e_act / e_emp - 1.
struct GeneralizationDiagnostic {
  double e_emp = 0.0;
  double e_act = 0.0;
  double ratio = 0.0;  // +infinity when e_emp = 0 < e_act

  bool finite() const;
};

GeneralizationDiagnostic generalization_ratio(double e_emp, double e_act);

}  // namespace permsig
