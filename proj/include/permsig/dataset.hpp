#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "permsig/random.hpp"

namespace permsig {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Feature matrix (one row per sample) with integer class labels 0..C-1.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  int class_count = 1;
  std::vector<std::string> feature_names;

  Dataset() = default;
  Dataset(Matrix features, std::vector<int> labels, int class_count,
          std::vector<std::string> feature_names = {});

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }

  /// Per-class sample counts, indexed by label.
  std::vector<std::size_t> class_sizes() const;

  /// Throws DataError when an invariant is broken.
  void validate() const;
};

/// Fold index for every sample of a dataset.
struct FoldAssignment {
  std::vector<int> fold_of;
  int k = 0;

  /// Sample indices that belong to fold `fold`.
  std::vector<std::size_t> members(int fold) const;
  /// Sample indices outside fold `fold`.
  std::vector<std::size_t> complement(int fold) const;
};

/// Reads a comma-separated file with a mandatory header row. Labels are
/// re-encoded 0..C-1 in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column);

/// Writes features followed by a "label" column holding the integer labels.
void save_csv(const Dataset& d, const std::filesystem::path& path);

/// Min-max scales every column onto [0, 1]. Constant columns become 0.
Dataset scale_unit_interval(const Dataset& d);

Dataset permute_labels(const Dataset& d, const PermutationPlan& plan);

/// Reorders rows, keeping each feature row paired with its label.
Dataset shuffle_rows(const Dataset& d, const PermutationPlan& plan);

FoldAssignment stratified_folds(const Dataset& d, int k, const PermutationPlan& plan);

/// Randomly splits a single-condition dataset into two pseudo-groups of n/2.
Dataset split_null_groups(const Dataset& d, const PermutationPlan& plan);

/// Drops one seeded-random row when n is odd; otherwise returns d unchanged.
Dataset trim_to_even(const Dataset& d, const PermutationPlan& plan);

/// Rows `index` of d, in the given order.
Dataset select_rows(const Dataset& d, std::span<const std::size_t> index);

/// Gaussian blobs with identity covariance. Class c is centred at c*effect on
/// the first min(5, dim) coordinates and 0 elsewhere.
Dataset synth_effect(int n_per_class, int dim, int classes, double effect,
                     const PermutationPlan& plan);

/// n standard-normal rows, all labelled 0 (C = 1).
Dataset synth_one_condition(int n, int dim, const PermutationPlan& plan);

}  // namespace permsig
