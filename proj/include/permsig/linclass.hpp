#pragma once

#include <optional>
#include <span>
#include <vector>

#include "permsig/dataset.hpp"
#include "permsig/dimred.hpp"

namespace permsig {

/// Soft-margin linear classifier; decision value w.x + b.
struct LinearSvm {
  Vector weights;
  double bias = 0.0;
  double regularization_c = 1.0;

  double decision(const Eigen::Ref<const Vector>& x) const { return weights.dot(x) + bias; }
  Vector decisions(const Matrix& x) const;
};

struct SvmOptions {
  double tolerance = 1e-6;   // maximal KKT violation at exit
  int max_passes = 10000;    // one pass = n working-set updates
};

/// Minimises 0.5 |w|^2 + c * sum hinge(1 - y_i (w.x_i + b)) by SMO on the dual
/// with a second-order working-set choice. `signs` are +1/-1.
LinearSvm svm_fit(const Matrix& x, std::span<const int> signs, double c,
                  const SvmOptions& options = {});

/// Primal objective, exposed for tests and diagnostics.
double svm_objective(const Matrix& x, std::span<const int> signs, const Vector& w, double b,
                     double c);

/// Logistic map from margin to P(y = +1).
struct Calibration {
  double slope = 0.0;
  double intercept = 0.0;

  double probability(double margin) const;
};

/// Sigmoid fit of labels on margins by damped Newton iterations (Platt's
/// method with smoothed targets, so separable margins still converge).
Calibration calibrate(std::span<const double> margins, std::span<const int> signs);

/// One binary problem of a one-vs-one decomposition: class `positive` against
/// class `negative`, optionally projected by a pair-specific PLS component.
struct PairModel {
  int negative = 0;
  int positive = 1;
  std::optional<LinearReducer> projection;
  LinearSvm svm;
  Calibration calibration;

  /// P(positive) for every row of x.
  Vector positive_probability(const Matrix& x) const;
};

struct OvoClassifier {
  int class_count = 0;
  std::vector<PairModel> pairs;  // (0,1), (0,2), ..., (C-2, C-1)
};

struct OvoOptions {
  double c = 1.0;
  bool pls_per_pair = false;
  SvmOptions svm;
};

OvoClassifier ovo_fit(const Matrix& x, std::span<const int> labels, int class_count,
                      const OvoOptions& options);

/// n x C matrix whose rows sum to 1: each pair's calibrated probabilities are
/// summed onto the classes they favour and divided by the number of pairs.
Matrix ovo_probabilities(const OvoClassifier& m, const Matrix& x);

std::vector<int> ovo_predict(const OvoClassifier& m, const Matrix& x);

/// Column means of an L x C matrix of per-region class probabilities.
Vector ensemble_probability(const Matrix& per_region);

/// Argmax; ties go to the lowest class index.
int ensemble_label(const Eigen::Ref<const Vector>& p_total);

}  // namespace permsig
