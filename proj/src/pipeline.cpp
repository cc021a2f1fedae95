#include "permsig/pipeline.hpp"

#include <algorithm>

#include "permsig/error.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kBlockSalt = 0xB10C000000000000ULL;

Matrix take_columns(const Matrix& x, const std::vector<int>& columns) {
  return x(Eigen::all, columns);
}

std::vector<int> to_signs(std::span<const int> labels) {
  std::vector<int> signs(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) signs[i] = labels[i] == 1 ? 1 : -1;
  return signs;
}

struct BlockModel {
  std::vector<int> columns;
  std::optional<AeModel> autoencoder;
  std::optional<LinearReducer> reducer;
  OvoClassifier classifier;

  Matrix features(const Matrix& x) const {
    Matrix z = take_columns(x, columns);
    if (autoencoder) z = ae_encode(*autoencoder, z);
    if (reducer) z = reduce(*reducer, z);
    return z;
  }
};

class PipelineModel final : public Model {
 public:
  explicit PipelineModel(std::vector<BlockModel> blocks) : blocks_(std::move(blocks)) {}

  std::vector<int> predict(const Matrix& x) const override {
    const Matrix p = probabilities(x);
    std::vector<int> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      out[static_cast<std::size_t>(i)] = ensemble_label(p.row(i).transpose());
    }
    return out;
  }

  Matrix probabilities(const Matrix& x) const {
    std::vector<Matrix> per_block;
    per_block.reserve(blocks_.size());
    for (const auto& block : blocks_) {
      per_block.push_back(ovo_probabilities(block.classifier, block.features(x)));
    }
    const Eigen::Index classes = per_block.front().cols();
    Matrix total(x.rows(), classes);
    Matrix regions(static_cast<Eigen::Index>(per_block.size()), classes);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (std::size_t l = 0; l < per_block.size(); ++l) {
        regions.row(static_cast<Eigen::Index>(l)) = per_block[l].row(i);
      }
      total.row(i) = ensemble_probability(regions).transpose();
    }
    return total;
  }

 private:
  std::vector<BlockModel> blocks_;
};

}  // namespace

void PipelineSpec::validate(int input_width) const {
  if (input_width < 1) throw ConfigError("pipeline needs at least one feature column");
  if (!(svm_c > 0.0)) throw ConfigError("svm_c must be positive");
  if (reducer == Reduction::Pca && pca_components < 1) {
    throw ConfigError("pca_components must be at least 1");
  }
  std::vector<int> owner(static_cast<std::size_t>(input_width), -1);
  for (std::size_t b = 0; b < region_blocks.size(); ++b) {
    if (region_blocks[b].empty()) {
      throw ConfigError("region block " + std::to_string(b) + " is empty");
    }
    for (int c : region_blocks[b]) {
      if (c < 0 || c >= input_width) {
        throw ConfigError("region block " + std::to_string(b) + " names column " +
                          std::to_string(c) + " outside 0.." + std::to_string(input_width - 1));
      }
      auto& slot = owner[static_cast<std::size_t>(c)];
      if (slot >= 0) {
        throw ConfigError("region blocks " + std::to_string(slot) + " and " + std::to_string(b) +
                          " overlap at column " + std::to_string(c));
      }
      slot = static_cast<int>(b);
    }
  }
  if (!region_blocks.empty()) {
    const auto missing = std::find(owner.begin(), owner.end(), -1);
    if (missing != owner.end()) {
      throw ConfigError("region blocks do not cover column " +
                        std::to_string(missing - owner.begin()));
    }
  }
  if (autoencoder) {
    for (const auto& block : resolved_blocks(input_width)) {
      autoencoder->validate(static_cast<int>(block.size()));
    }
  }
}

std::vector<std::vector<int>> PipelineSpec::resolved_blocks(int input_width) const {
  if (!region_blocks.empty()) return region_blocks;
  std::vector<int> all(static_cast<std::size_t>(input_width));
  for (int c = 0; c < input_width; ++c) all[static_cast<std::size_t>(c)] = c;
  return {all};
}

std::vector<std::vector<int>> equal_blocks(int width, int count) {
  if (count < 1 || count > width) {
    throw ConfigError("cannot split " + std::to_string(width) + " columns into " +
                      std::to_string(count) + " blocks");
  }
  std::vector<std::vector<int>> blocks(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    const int start = b * width / count;
    const int stop = (b + 1) * width / count;
    for (int c = start; c < stop; ++c) blocks[static_cast<std::size_t>(b)].push_back(c);
  }
  return blocks;
}

std::unique_ptr<Model> PipelineLearner::fit(const Matrix& x, std::span<const int> labels,
                                            int class_count, const PermutationPlan& plan) const {
  const int width = static_cast<int>(x.cols());
  spec_.validate(width);
  OvoOptions options;
  options.c = spec_.svm_c;
  options.pls_per_pair = spec_.reducer == Reduction::Pls;

  std::vector<BlockModel> blocks;
  const auto resolved = spec_.resolved_blocks(width);
  for (std::size_t b = 0; b < resolved.size(); ++b) {
    BlockModel block;
    block.columns = resolved[b];
    Matrix z = take_columns(x, block.columns);
    if (spec_.autoencoder) {
      block.autoencoder = ae_fit(z, *spec_.autoencoder, plan.child(kBlockSalt + b));
      z = ae_encode(*block.autoencoder, z);
    }
    if (spec_.reducer == Reduction::Pca) {
      block.reducer = pca_fit(z, spec_.pca_components);
      z = reduce(*block.reducer, z);
    }
    block.classifier = ovo_fit(z, labels, class_count, options);
    blocks.push_back(std::move(block));
  }
  return std::make_unique<PipelineModel>(std::move(blocks));
}

int PipelineLearner::classifier_dimension(int input_width) const {
  switch (spec_.reducer) {
    case Reduction::Pls:
      return 1;
    case Reduction::Pca:
      return spec_.pca_components;
    case Reduction::None:
      break;
  }
  if (spec_.autoencoder) return spec_.autoencoder->z_dim();
  std::size_t widest = 0;
  for (const auto& block : spec_.resolved_blocks(input_width)) widest = std::max(widest, block.size());
  return static_cast<int>(widest);
}

Matrix PipelineLearner::probabilities(const Model& fitted, const Matrix& x) {
  const auto* model = dynamic_cast<const PipelineModel*>(&fitted);
  if (model == nullptr) throw ConfigError("probabilities need a model fitted by PipelineLearner");
  return model->probabilities(x);
}

Matrix FrozenExtractor::transform(const Matrix& x) const {
  std::vector<Matrix> parts;
  Eigen::Index total = 0;
  for (const auto& block : blocks) {
    Matrix z = take_columns(x, block.columns);
    if (block.autoencoder) z = ae_encode(*block.autoencoder, z);
    if (block.reducer) z = reduce(*block.reducer, z);
    total += z.cols();
    parts.push_back(std::move(z));
  }
  Matrix out(x.rows(), total);
  Eigen::Index at = 0;
  for (const auto& part : parts) {
    out.middleCols(at, part.cols()) = part;
    at += part.cols();
  }
  return out;
}

std::vector<std::vector<int>> FrozenExtractor::output_blocks() const {
  std::vector<std::vector<int>> out;
  int at = 0;
  for (const auto& block : blocks) {
    int width = static_cast<int>(block.columns.size());
    if (block.autoencoder) width = block.autoencoder->architecture().z_dim();
    if (block.reducer) width = static_cast<int>(block.reducer->components());
    std::vector<int> cols;
    for (int c = 0; c < width; ++c) cols.push_back(at + c);
    at += width;
    out.push_back(std::move(cols));
  }
  return out;
}

AltSplit split_for_alt_scheme(const PipelineSpec& spec, const Dataset& d,
                              const PermutationPlan& plan) {
  const int width = static_cast<int>(d.cols());
  spec.validate(width);
  const bool keep_pls_per_pair = spec.reducer == Reduction::Pls && d.class_count > 2;

  AltSplit split;
  const auto resolved = spec.resolved_blocks(width);
  for (std::size_t b = 0; b < resolved.size(); ++b) {
    FrozenExtractor::Block block;
    block.columns = resolved[b];
    Matrix z = take_columns(d.features, block.columns);
    if (spec.autoencoder) {
      block.autoencoder = ae_fit(z, *spec.autoencoder, plan.child(kBlockSalt + b));
      z = ae_encode(*block.autoencoder, z);
    }
    if (spec.reducer == Reduction::Pca) {
      block.reducer = pca_fit(z, spec.pca_components);
    } else if (spec.reducer == Reduction::Pls && !keep_pls_per_pair) {
      if (d.class_count == 2) {
        block.reducer = pls1_fit(z, to_signs(d.labels));
      } else {
        block.reducer = pca_fit(z, 1);
      }
    }
    split.extractor.blocks.push_back(std::move(block));
  }
  split.classifier_stage.svm_c = spec.svm_c;
  split.classifier_stage.reducer = keep_pls_per_pair ? Reduction::Pls : Reduction::None;
  split.classifier_stage.region_blocks = split.extractor.output_blocks();
  return split;
}

}  // namespace permsig
