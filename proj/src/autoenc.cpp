#include "permsig/autoenc.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "permsig/error.hpp"

namespace permsig {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void apply_activation(Matrix& z, Activation f) {
  switch (f) {
    case Activation::Identity:
      break;
    case Activation::Sigmoid:
      z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
      break;
    case Activation::Relu:
      z = z.cwiseMax(0.0);
      break;
  }
}

// Multiplies `grad` by f'(z), expressed through the layer output a = f(z).
void apply_derivative(Matrix& grad, const Matrix& a, Activation f) {
  switch (f) {
    case Activation::Identity:
      break;
    case Activation::Sigmoid:
      grad.array() *= a.array() * (1.0 - a.array());
      break;
    case Activation::Relu:
      grad.array() *= (a.array() > 0.0).cast<double>();
      break;
  }
}

// Outputs of every layer; entry 0 is the input itself.
std::vector<Matrix> forward_all(const AeModel& m, const Matrix& x, std::size_t depth) {
  std::vector<Matrix> outputs;
  outputs.reserve(depth + 1);
  outputs.push_back(x);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = m.layers()[l];
    Matrix z = outputs.back() * m.weights(l).transpose();
    z.rowwise() += m.bias(l).transpose();
    apply_activation(z, layer.activation);
    outputs.push_back(std::move(z));
  }
  return outputs;
}

void check_width(const AeModel& m, const Matrix& x) {
  if (x.cols() != m.input_width()) {
    throw DataError("autoencoder expects " + std::to_string(m.input_width()) +
                    " columns, got " + std::to_string(x.cols()));
  }
}

const char* activation_name(Activation f) {
  switch (f) {
    case Activation::Identity:
      return "identity";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Relu:
      return "relu";
  }
  return "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "relu") return Activation::Relu;
  throw DataError("unknown activation \"" + name + "\" in model file");
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DataError("bad number \"" + s + "\" in model file");
  return v;
}

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw DataError("model file: expected \"" + want + "\", got \"" + got + "\"");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw DataError(std::string("model file: cannot read ") + what);
  return v;
}

double read_hex(std::istream& in, const char* what) {
  return unhex(read_value<std::string>(in, what));
}

}  // namespace

AeArchitecture AeArchitecture::uniform(std::vector<int> widths, Activation activation) {
  AeArchitecture arch;
  arch.encoder_activations.assign(widths.size(), activation);
  arch.encoder_widths = std::move(widths);
  return arch;
}

void AeArchitecture::validate(int input_width) const {
  if (encoder_widths.empty()) throw ConfigError("autoencoder needs at least one encoder layer");
  if (encoder_activations.size() != encoder_widths.size()) {
    throw ConfigError("autoencoder needs one activation per encoder layer");
  }
  for (int w : encoder_widths) {
    if (w < 1) throw ConfigError("autoencoder layer widths must be positive");
  }
  if (z_dim() >= input_width && !(z_dim() == input_width && encoder_widths.size() == 1)) {
    // A single full-width layer is allowed so the identity map is reachable.
    throw ConfigError("autoencoder z_dim (" + std::to_string(z_dim()) +
                      ") must be below the input width (" + std::to_string(input_width) + ")");
  }
  if (epochs < 1) throw ConfigError("autoencoder epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("autoencoder learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("autoencoder batch_size must be at least 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("autoencoder validation_fraction must lie in [0, 1)");
  }
}

AeModel::AeModel(AeArchitecture arch, int input_width, Activation output)
    : arch_(std::move(arch)), input_width_(input_width) {
  std::vector<int> widths{input_width};
  std::vector<Activation> acts;
  for (std::size_t i = 0; i < arch_.encoder_widths.size(); ++i) {
    widths.push_back(arch_.encoder_widths[i]);
    acts.push_back(arch_.encoder_activations[i]);
  }
  for (std::size_t i = arch_.encoder_widths.size() - 1; i-- > 0;) {
    widths.push_back(arch_.encoder_widths[i]);
    acts.push_back(arch_.encoder_activations[i]);
  }
  widths.push_back(input_width);
  acts.push_back(output);

  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.inputs = widths[l];
    layer.outputs = widths[l + 1];
    layer.activation = acts[l];
    layer.weight_offset = offset;
    offset += static_cast<Eigen::Index>(layer.inputs) * layer.outputs;
    layer.bias_offset = offset;
    offset += layer.outputs;
    layers_.push_back(layer);
  }
  params_ = Vector::Zero(offset);
}

AeModel::WeightMap AeModel::weights(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return WeightMap(params_.data() + l.weight_offset, l.outputs, l.inputs);
}

AeModel::ConstWeightMap AeModel::weights(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return ConstWeightMap(params_.data() + l.weight_offset, l.outputs, l.inputs);
}

Eigen::Map<Vector> AeModel::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return Eigen::Map<Vector>(params_.data() + l.bias_offset, l.outputs);
}

Eigen::Map<const Vector> AeModel::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return Eigen::Map<const Vector>(params_.data() + l.bias_offset, l.outputs);
}

bool operator==(const AeModel& a, const AeModel& b) {
  if (a.input_width_ != b.input_width_ || a.layers_.size() != b.layers_.size()) return false;
  const auto& x = a.arch_;
  const auto& y = b.arch_;
  if (x.encoder_widths != y.encoder_widths || x.encoder_activations != y.encoder_activations ||
      x.output_activation != y.output_activation || x.epochs != y.epochs ||
      x.learning_rate != y.learning_rate || x.batch_size != y.batch_size ||
      x.validation_fraction != y.validation_fraction) {
    return false;
  }
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].activation != b.layers_[l].activation) return false;
  }
  if (a.training_history.size() != b.training_history.size()) return false;
  for (std::size_t e = 0; e < a.training_history.size(); ++e) {
    if (a.training_history[e].train_mse != b.training_history[e].train_mse ||
        a.training_history[e].validation_mse != b.training_history[e].validation_mse) {
      return false;
    }
  }
  return a.params_.size() == b.params_.size() &&
         std::equal(a.params_.data(), a.params_.data() + a.params_.size(), b.params_.data());
}

Matrix ae_encode(const AeModel& m, const Matrix& x) {
  check_width(m, x);
  return std::move(forward_all(m, x, m.encoder_depth()).back());
}

Matrix ae_reconstruct(const AeModel& m, const Matrix& x) {
  check_width(m, x);
  return std::move(forward_all(m, x, m.layers().size()).back());
}

double ae_mse(const AeModel& m, const Matrix& x) {
  if (x.size() == 0) throw DataError("MSE of an empty batch");
  const Matrix residual = ae_reconstruct(m, x) - x;
  return residual.squaredNorm() / static_cast<double>(x.size());
}

Vector ae_gradient(const AeModel& m, const Matrix& batch) {
  check_width(m, batch);
  if (batch.rows() == 0) throw DataError("gradient of an empty batch");
  const auto outputs = forward_all(m, batch, m.layers().size());
  Vector grad = Vector::Zero(m.parameters().size());

  Matrix delta = (outputs.back() - batch) * (2.0 / static_cast<double>(batch.size()));
  for (std::size_t l = m.layers().size(); l-- > 0;) {
    const auto& layer = m.layers()[l];
    apply_derivative(delta, outputs[l + 1], layer.activation);
    Eigen::Map<RowMatrix> dw(grad.data() + layer.weight_offset, layer.outputs, layer.inputs);
    dw.noalias() = delta.transpose() * outputs[l];
    Eigen::Map<Vector>(grad.data() + layer.bias_offset, layer.outputs) =
        delta.colwise().sum().transpose();
    if (l > 0) delta = delta * m.weights(l);
  }
  return grad;
}

AeModel ae_fit(const Matrix& x, const AeArchitecture& arch, const PermutationPlan& plan) {
  if (x.rows() < 4) throw DataError("autoencoder training needs at least 4 samples");
  if (!x.allFinite()) throw DataError("autoencoder input contains non-finite values");
  const int width = static_cast<int>(x.cols());
  arch.validate(width);

  Activation output = Activation::Identity;
  switch (arch.output_activation) {
    case OutputActivation::Identity:
      break;
    case OutputActivation::Sigmoid:
      output = Activation::Sigmoid;
      break;
    case OutputActivation::Auto:
      if (x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0) output = Activation::Sigmoid;
      break;
  }
  AeModel model(arch, width, output);

  auto init = plan.stream(StreamTag::AeInit);
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    const double a = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    auto w = model.weights(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = init.uniform(-a, a);
    }
  }

  auto split = plan.stream(StreamTag::AeSplit);
  const auto order = random_permutation(static_cast<std::size_t>(x.rows()), split);
  auto n_val = static_cast<std::size_t>(std::floor(arch.validation_fraction * static_cast<double>(x.rows())));
  n_val = std::min(n_val, order.size() - 1);
  const std::size_t n_train = order.size() - n_val;
  std::vector<std::size_t> train_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));

  Matrix train_set(static_cast<Eigen::Index>(n_train), x.cols());
  for (std::size_t i = 0; i < n_train; ++i) {
    train_set.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train_rows[i]));
  }
  Matrix val_set(static_cast<Eigen::Index>(n_val), x.cols());
  for (std::size_t i = 0; i < n_val; ++i) {
    val_set.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[n_train + i]));
  }

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double epsilon = 1e-8;
  Vector first = Vector::Zero(model.parameters().size());
  Vector second = Vector::Zero(model.parameters().size());
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  auto epoch_stream = plan.stream(StreamTag::AeEpoch);
  std::vector<std::size_t> batch_order(n_train);
  const auto batch_size = static_cast<std::size_t>(arch.batch_size);
  Matrix batch;
  for (int epoch = 0; epoch < arch.epochs; ++epoch) {
    for (std::size_t i = 0; i < n_train; ++i) batch_order[i] = i;
    epoch_stream.shuffle(std::span<std::size_t>(batch_order));
    for (std::size_t start = 0; start < n_train; start += batch_size) {
      const std::size_t count = std::min(batch_size, n_train - start);
      batch.resize(static_cast<Eigen::Index>(count), x.cols());
      for (std::size_t i = 0; i < count; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) =
            train_set.row(static_cast<Eigen::Index>(batch_order[start + i]));
      }
      const Vector grad = ae_gradient(model, batch);
      beta1_t *= beta1;
      beta2_t *= beta2;
      first = beta1 * first + (1.0 - beta1) * grad;
      second = beta2 * second + (1.0 - beta2) * grad.cwiseProduct(grad);
      const double step = arch.learning_rate / (1.0 - beta1_t);
      const double correction = 1.0 / (1.0 - beta2_t);
      model.parameters().array() -=
          step * first.array() / ((second.array() * correction).sqrt() + epsilon);
    }

    EpochLoss loss;
    loss.train_mse = ae_mse(model, train_set);
    if (!std::isfinite(loss.train_mse)) {
      throw NumericalError("autoencoder training diverged at epoch " + std::to_string(epoch + 1));
    }
    if (n_val > 0) loss.validation_mse = ae_mse(model, val_set);
    model.training_history.push_back(loss);
  }
  return model;
}

void save_model(const AeModel& m, std::ostream& out) {
  const auto& arch = m.architecture();
  out << "permsig-autoencoder 1\n";
  out << "input_width " << m.input_width() << '\n';
  out << "epochs " << arch.epochs << '\n';
  out << "learning_rate " << hex(arch.learning_rate) << '\n';
  out << "batch_size " << arch.batch_size << '\n';
  out << "validation_fraction " << hex(arch.validation_fraction) << '\n';
  out << "output_activation "
      << (arch.output_activation == OutputActivation::Auto
              ? "auto"
              : activation_name(arch.output_activation == OutputActivation::Sigmoid
                                    ? Activation::Sigmoid
                                    : Activation::Identity))
      << '\n';
  out << "encoder " << arch.encoder_widths.size();
  for (std::size_t i = 0; i < arch.encoder_widths.size(); ++i) {
    out << ' ' << arch.encoder_widths[i] << ' ' << activation_name(arch.encoder_activations[i]);
  }
  out << '\n';
  out << "layers " << m.layers().size() << '\n';
  for (const auto& layer : m.layers()) {
    out << layer.inputs << ' ' << layer.outputs << ' ' << activation_name(layer.activation) << '\n';
  }
  out << "parameters " << m.parameters().size() << '\n';
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i) out << hex(m.parameters()(i)) << '\n';
  out << "history " << m.training_history.size() << '\n';
  for (const auto& e : m.training_history) {
    out << hex(e.train_mse) << ' ' << (e.validation_mse ? hex(*e.validation_mse) : "-") << '\n';
  }
}

AeModel load_model(std::istream& in) {
  expect_token(in, "permsig-autoencoder");
  if (read_value<int>(in, "version") != 1) throw DataError("unsupported model file version");
  AeArchitecture arch;
  expect_token(in, "input_width");
  const int width = read_value<int>(in, "input_width");
  expect_token(in, "epochs");
  arch.epochs = read_value<int>(in, "epochs");
  expect_token(in, "learning_rate");
  arch.learning_rate = read_hex(in, "learning_rate");
  expect_token(in, "batch_size");
  arch.batch_size = read_value<int>(in, "batch_size");
  expect_token(in, "validation_fraction");
  arch.validation_fraction = read_hex(in, "validation_fraction");
  expect_token(in, "output_activation");
  const auto out_name = read_value<std::string>(in, "output_activation");
  arch.output_activation = out_name == "auto"      ? OutputActivation::Auto
                           : out_name == "sigmoid" ? OutputActivation::Sigmoid
                                                   : OutputActivation::Identity;
  expect_token(in, "encoder");
  const auto depth = read_value<std::size_t>(in, "encoder depth");
  for (std::size_t i = 0; i < depth; ++i) {
    arch.encoder_widths.push_back(read_value<int>(in, "encoder width"));
    arch.encoder_activations.push_back(parse_activation(read_value<std::string>(in, "activation")));
  }
  expect_token(in, "layers");
  const auto count = read_value<std::size_t>(in, "layer count");
  std::vector<DenseLayer> shapes(count);
  for (auto& layer : shapes) {
    layer.inputs = read_value<int>(in, "layer inputs");
    layer.outputs = read_value<int>(in, "layer outputs");
    layer.activation = parse_activation(read_value<std::string>(in, "layer activation"));
  }
  if (count != 2 * depth || count == 0) throw DataError("model file: layer count mismatch");

  AeModel model(arch, width, shapes.back().activation);
  for (std::size_t l = 0; l < count; ++l) {
    const auto& got = model.layers()[l];
    if (got.inputs != shapes[l].inputs || got.outputs != shapes[l].outputs ||
        got.activation != shapes[l].activation) {
      throw DataError("model file: layer " + std::to_string(l) + " shape mismatch");
    }
  }
  expect_token(in, "parameters");
  const auto n_params = read_value<Eigen::Index>(in, "parameter count");
  if (n_params != model.parameters().size()) throw DataError("model file: parameter count mismatch");
  for (Eigen::Index i = 0; i < n_params; ++i) model.parameters()(i) = read_hex(in, "parameter");
  expect_token(in, "history");
  const auto epochs = read_value<std::size_t>(in, "history length");
  for (std::size_t e = 0; e < epochs; ++e) {
    EpochLoss loss;
    loss.train_mse = read_hex(in, "train loss");
    const auto val = read_value<std::string>(in, "validation loss");
    if (val != "-") loss.validation_mse = unhex(val);
    model.training_history.push_back(loss);
  }
  return model;
}

void save_model(const AeModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  save_model(m, out);
}

AeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace permsig
