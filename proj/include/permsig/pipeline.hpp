#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "permsig/autoenc.hpp"
#include "permsig/dataset.hpp"
#include "permsig/linclass.hpp"

namespace permsig {

/// A fitted classifier: maps feature rows to class labels.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::vector<int> predict(const Matrix& x) const = 0;
};

/// A learning algorithm. Fitting must be a pure function of its arguments.
class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::unique_ptr<Model> fit(const Matrix& x, std::span<const int> labels,
                                     int class_count, const PermutationPlan& plan) const = 0;
  /// Input dimension seen by the final linear classifier, used for bounds.
  virtual int classifier_dimension(int input_width) const = 0;
};

enum class Reduction { None, Pls, Pca };

/// Feature extractor -> reducer -> linear classifier, optionally replicated
/// over disjoint column blocks whose class probabilities are averaged.
struct PipelineSpec {
  std::optional<AeArchitecture> autoencoder;
  Reduction reducer = Reduction::Pls;
  int pca_components = 1;
  double svm_c = 1.0;
  /// Column indices of each region. Empty means one block with every column.
  std::vector<std::vector<int>> region_blocks;

  /// Throws ConfigError when the blocks do not partition 0..input_width-1 or
  /// other settings are inconsistent with the input width.
  void validate(int input_width) const;

  std::vector<std::vector<int>> resolved_blocks(int input_width) const;
};

/// Splits 0..width-1 into `count` contiguous blocks of near-equal size.
std::vector<std::vector<int>> equal_blocks(int width, int count);

class PipelineLearner final : public Learner {
 public:
  explicit PipelineLearner(PipelineSpec spec) : spec_(std::move(spec)) {}

  std::unique_ptr<Model> fit(const Matrix& x, std::span<const int> labels, int class_count,
                             const PermutationPlan& plan) const override;
  int classifier_dimension(int input_width) const override;

  const PipelineSpec& spec() const { return spec_; }

  /// Per-class probabilities of every row, averaged over region blocks.
  static Matrix probabilities(const Model& fitted, const Matrix& x);

 private:
  PipelineSpec spec_;
};

/// Feature-extraction stage of a pipeline fitted once and then frozen: the
/// autoencoder and the unsupervised or two-class reducer for each block.
struct FrozenExtractor {
  struct Block {
    std::vector<int> columns;
    std::optional<AeModel> autoencoder;
    std::optional<LinearReducer> reducer;
  };
  std::vector<Block> blocks;

  /// Transformed features; output columns are block outputs concatenated.
  Matrix transform(const Matrix& x) const;
  /// Output column indices grouped per block.
  std::vector<std::vector<int>> output_blocks() const;
};

/// Fits the extraction stage on the whole dataset. PLS is used when the data
/// has exactly two classes, PCA otherwise (a single condition cannot drive
/// PLS). For more than two classes a PLS reducer stays in the per-pair
/// classifier stage and `classifier_stage` reflects that.
struct AltSplit {
  FrozenExtractor extractor;
  PipelineSpec classifier_stage;
};
AltSplit split_for_alt_scheme(const PipelineSpec& spec, const Dataset& d,
                              const PermutationPlan& plan);

}  // namespace permsig
