#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "permsig/dataset.hpp"

namespace permsig {

enum class Activation { Identity, Sigmoid, Relu };

enum class OutputActivation {
  Auto,  // sigmoid when every training input lies in [0, 1], identity otherwise
  Identity,
  Sigmoid,
};

/// Fully-connected autoencoder shape and training hyperparameters. The
/// decoder mirrors the encoder widths in reverse and ends at the input width.
struct AeArchitecture {
  std::vector<int> encoder_widths;  // last entry is the bottleneck width
  std::vector<Activation> encoder_activations;  // one per encoder layer
  OutputActivation output_activation = OutputActivation::Auto;
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 32;
  double validation_fraction = 0.3;

  int z_dim() const { return encoder_widths.empty() ? 0 : encoder_widths.back(); }

  /// Same activation on every encoder layer.
  static AeArchitecture uniform(std::vector<int> widths, Activation activation);

  /// Throws ConfigError for a malformed architecture given the input width.
  void validate(int input_width) const;
};

struct EpochLoss {
  double train_mse = 0.0;
  std::optional<double> validation_mse;
};

/// One dense layer y = f(W x + b), W stored row-major inside the flat
/// parameter vector of the model.
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::Identity;
  Eigen::Index weight_offset = 0;
  Eigen::Index bias_offset = 0;
};

class AeModel {
 public:
  AeModel() = default;
  AeModel(AeArchitecture arch, int input_width, Activation output);

  const AeArchitecture& architecture() const { return arch_; }
  int input_width() const { return input_width_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t encoder_depth() const { return arch_.encoder_widths.size(); }

  /// All weights and biases, layer by layer.
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  using WeightMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstWeightMap =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  WeightMap weights(std::size_t layer);
  ConstWeightMap weights(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  std::vector<EpochLoss> training_history;

  friend bool operator==(const AeModel& a, const AeModel& b);

 private:
  AeArchitecture arch_;
  int input_width_ = 0;
  std::vector<DenseLayer> layers_;
  Vector params_;
};

/// Trains with Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the mean squared
/// reconstruction error for exactly arch.epochs epochs. The trailing
/// validation_fraction of a seeded shuffle is scored each epoch, never trained
/// on. Initialisation and minibatch order depend only on `plan`.
AeModel ae_fit(const Matrix& x, const AeArchitecture& arch, const PermutationPlan& plan);

/// Bottleneck representation e(x).
Matrix ae_encode(const AeModel& m, const Matrix& x);

/// Full reconstruction d(e(x)).
Matrix ae_reconstruct(const AeModel& m, const Matrix& x);

/// (1 / (rows * cols)) * sum of squared reconstruction residuals.
double ae_mse(const AeModel& m, const Matrix& x);

/// Exact gradient of ae_mse(m, batch) with respect to m.parameters().
Vector ae_gradient(const AeModel& m, const Matrix& batch);

/// Text dump: a header line, the architecture, layer shapes, then every
/// parameter as a hexadecimal float so a reload is bit-exact.
void save_model(const AeModel& m, std::ostream& out);
AeModel load_model(std::istream& in);
void save_model(const AeModel& m, const std::filesystem::path& path);
AeModel load_model(const std::filesystem::path& path);

}  // namespace permsig
