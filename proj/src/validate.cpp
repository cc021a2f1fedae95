#include "permsig/validate.hpp"

#include <cmath>
#include <limits>

#include "permsig/error.hpp"

namespace permsig {

namespace {
constexpr std::uint64_t kFoldSalt = 0xF01D000000000000ULL;
}

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Resub:
      return "resub";
    case Scheme::Rub:
      return "rub";
    case Scheme::KFold:
      return "kfold";
  }
  return "resub";
}

double error_rate(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw DataError("prediction and label counts differ or are empty");
  }
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

ErrorEstimate resub_error(const Learner& learner, const Dataset& d, const PermutationPlan& plan) {
  const auto model = learner.fit(d.features, d.labels, d.class_count, plan);
  ErrorEstimate e;
  e.scheme = Scheme::Resub;
  e.iteration = plan.replicate_index;
  e.value = error_rate(model->predict(d.features), d.labels);
  return e;
}

ErrorEstimate rub_error(const ErrorEstimate& resub, const BoundSpec& spec) {
  if (resub.scheme != Scheme::Resub) throw ConfigError("RUB correction applies to resubstitution estimates");
  const double mu = upper_bound(spec);
  ErrorEstimate e = resub;
  e.scheme = Scheme::Rub;
  e.bound = mu;
  e.resub = resub.value;
  e.value = resub.value + mu;
  return e;
}

double accuracy(const ErrorEstimate& e) {
  if (e.scheme == Scheme::Rub && e.resub && e.bound) return (1.0 - *e.resub) - *e.bound;
  return 1.0 - e.value;
}

KFoldResult kfold_errors(const Learner& learner, const Dataset& d, const FoldAssignment& folds,
                         const PermutationPlan& plan) {
  if (folds.fold_of.size() != d.rows()) throw DataError("fold assignment does not match dataset size");
  KFoldResult result;
  result.predictions.assign(d.rows(), -1);
  for (int k = 0; k < folds.k; ++k) {
    const auto test_rows = folds.members(k);
    const auto train_rows = folds.complement(k);
    if (test_rows.empty()) {
      result.failures.push_back({k, "empty test fold"});
      continue;
    }
    const Dataset train = select_rows(d, train_rows);
    const Dataset test = select_rows(d, test_rows);
    try {
      const auto model =
          learner.fit(train.features, train.labels, d.class_count, plan.child(kFoldSalt + static_cast<std::uint64_t>(k)));
      const auto test_pred = model->predict(test.features);
      const auto train_pred = model->predict(train.features);
      for (std::size_t i = 0; i < test_rows.size(); ++i) result.predictions[test_rows[i]] = test_pred[i];

      ErrorEstimate te;
      te.scheme = Scheme::KFold;
      te.fold = k;
      te.iteration = plan.replicate_index;
      te.value = error_rate(test_pred, test.labels);
      ErrorEstimate tr = te;
      tr.value = error_rate(train_pred, train.labels);
      result.test_errors.push_back(te);
      result.train_errors.push_back(tr);
    } catch (const Error& ex) {
      result.failures.push_back({k, ex.what()});
    }
  }
  return result;
}

bool GeneralizationDiagnostic::finite() const { return std::isfinite(ratio); }

GeneralizationDiagnostic generalization_ratio(double e_emp, double e_act) {
  if (e_emp < 0.0 || e_act < 0.0) throw ConfigError("error rates must be non-negative");
  GeneralizationDiagnostic g{e_emp, e_act, 0.0};
  if (e_emp > 0.0) {
    g.ratio = e_act / e_emp - 1.0;
  } else {
    g.ratio = e_act == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return g;
}

}  // namespace permsig
