#include <doctest.h>

#include <cmath>
#include <sstream>

#include "permsig/autoenc.hpp"
#include "permsig/error.hpp"
#include "test_support.hpp"

using namespace permsig;

namespace {

Matrix uniform01(int n, int dim, std::uint64_t seed) {
  auto s = PermutationPlan{seed, 0}.stream(StreamTag::Synth);
  Matrix x(n, dim);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < dim; ++c) x(r, c) = s.uniform();
  }
  return x;
}

// Rows generated from a few latent factors squashed into (0, 1).
Matrix low_rank01(int n, int dim, int rank, std::uint64_t seed) {
  auto s = PermutationPlan{seed, 1}.stream(StreamTag::Synth);
  Matrix loadings(rank, dim);
  for (int i = 0; i < rank; ++i) {
    for (int j = 0; j < dim; ++j) loadings(i, j) = s.normal();
  }
  Matrix x(n, dim);
  for (int r = 0; r < n; ++r) {
    Vector f(rank);
    for (int i = 0; i < rank; ++i) f(i) = s.normal();
    for (int j = 0; j < dim; ++j) {
      const double z = f.dot(loadings.col(j)) + 0.1 * s.normal();
      x(r, j) = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return x;
}

AeModel random_model(const std::vector<int>& widths, Activation hidden, Activation output, int input,
                     std::uint64_t seed) {
  AeModel m(AeArchitecture::uniform(widths, hidden), input, output);
  auto s = PermutationPlan{seed, 0}.stream(StreamTag::AeInit);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i) m.parameters()(i) = s.uniform(-0.5, 0.5);
  return m;
}

// Central differences of ae_mse, step 1e-5.
Vector finite_difference(AeModel m, const Matrix& batch) {
  constexpr double h = 1e-5;
  Vector g(m.parameters().size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double keep = m.parameters()(i);
    m.parameters()(i) = keep + h;
    const double up = ae_mse(m, batch);
    m.parameters()(i) = keep - h;
    const double down = ae_mse(m, batch);
    m.parameters()(i) = keep;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

// Elementwise relative error with a 1e-7 floor on the denominator so entries
// that are zero up to finite-difference noise do not dominate.
double max_relative_error(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a(i)), std::abs(b(i)), 1e-7});
    worst = std::max(worst, std::abs(a(i) - b(i)) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  struct Case {
    std::vector<int> widths;
    Activation hidden;
    Activation output;
    int input;
  };
  const Case cases[] = {
      {{5, 3}, Activation::Sigmoid, Activation::Sigmoid, 8},
      {{6, 2}, Activation::Relu, Activation::Identity, 10},
      {{40, 10, 2}, Activation::Sigmoid, Activation::Sigmoid, 72},  // 722-400-100-20 scaled down
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    CAPTURE(c.input);
    const auto m = random_model(c.widths, c.hidden, c.output, c.input, seed++);
    const Matrix batch = uniform01(7, c.input, seed++);
    CHECK(max_relative_error(ae_gradient(m, batch), finite_difference(m, batch)) < 1e-4);
  }
}

TEST_CASE("gradient vanishes at perfect reconstruction and averages over rows") {
  AeModel m(AeArchitecture::uniform({4}, Activation::Identity), 4, Activation::Identity);
  m.weights(0) = Matrix::Identity(4, 4);
  m.weights(1) = Matrix::Identity(4, 4);
  const Matrix x = uniform01(6, 4, 3);
  CHECK(ae_mse(m, x) == doctest::Approx(0.0));
  CHECK(ae_gradient(m, x).cwiseAbs().maxCoeff() < 1e-15);

  // The loss is a per-row mean, so the gradient of a stacked batch is the
  // row-weighted mean of the parts.
  const auto r = random_model({3}, Activation::Sigmoid, Activation::Sigmoid, 5, 8);
  const Matrix b1 = uniform01(3, 5, 9);
  const Matrix b2 = uniform01(5, 5, 10);
  Matrix stacked(8, 5);
  stacked << b1, b2;
  const Vector mixed = (3.0 * ae_gradient(r, b1) + 5.0 * ae_gradient(r, b2)) / 8.0;
  CHECK((ae_gradient(r, stacked) - mixed).cwiseAbs().maxCoeff() < 1e-14);
  Matrix twice(6, 5);
  twice << b1, b1;
  CHECK((ae_gradient(r, twice) - ae_gradient(r, b1)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("encoder forward pass") {
  SUBCASE("zero sigmoid network outputs one half") {
    AeModel m(AeArchitecture::uniform({4, 2}, Activation::Sigmoid), 6, Activation::Sigmoid);
    const Matrix z = ae_encode(m, uniform01(3, 6, 1));
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 2);
    CHECK((z.array() == 0.5).all());
  }
  SUBCASE("zero ReLU layer propagates zeros") {
    AeModel m(AeArchitecture::uniform({4, 2}, Activation::Relu), 6, Activation::Identity);
    CHECK(ae_encode(m, uniform01(3, 6, 1)).isZero());
  }
  SUBCASE("output ranges") {
    const auto s = random_model({4, 2}, Activation::Sigmoid, Activation::Sigmoid, 6, 4);
    const Matrix out = ae_reconstruct(s, uniform01(10, 6, 2) * 10.0);
    CHECK((out.array() > 0.0).all());
    CHECK((out.array() < 1.0).all());
    const auto r = random_model({4, 2}, Activation::Relu, Activation::Relu, 6, 4);
    CHECK((ae_reconstruct(r, uniform01(10, 6, 2)).array() >= 0.0).all());
  }
  SUBCASE("dimension mismatch") {
    AeModel m(AeArchitecture::uniform({4, 2}, Activation::Sigmoid), 6, Activation::Sigmoid);
    CHECK_THROWS_AS(ae_encode(m, uniform01(3, 5, 1)), DataError);
  }
}

TEST_CASE("linear autoencoder learns the identity") {
  auto arch = AeArchitecture::uniform({4}, Activation::Identity);
  arch.output_activation = OutputActivation::Identity;
  arch.epochs = 200;
  arch.learning_rate = 0.01;
  arch.batch_size = 5;
  arch.validation_fraction = 0.0;
  const Matrix x = uniform01(20, 4, 21);
  const auto m = ae_fit(x, arch, {5, 0});
  REQUIRE(m.training_history.size() == 200);
  CHECK(m.training_history.back().train_mse < 1e-3);
  CHECK(!m.training_history.back().validation_mse.has_value());
}

TEST_CASE("training is deterministic and improves the loss") {
  auto arch = AeArchitecture::uniform({8, 3}, Activation::Sigmoid);
  arch.epochs = 40;
  arch.learning_rate = 0.01;
  arch.batch_size = 8;
  const Matrix x = low_rank01(50, 16, 3, 8);
  const auto a = ae_fit(x, arch, {99, 2});
  const auto b = ae_fit(x, arch, {99, 2});
  CHECK(a == b);
  CHECK(!(a == ae_fit(x, arch, {99, 3})));
  REQUIRE(a.training_history.size() == 40);
  CHECK(a.training_history.back().train_mse <= a.training_history.front().train_mse);
  CHECK(a.training_history.back().validation_mse.has_value());
  CHECK(a.layers().back().activation == Activation::Sigmoid);
}

TEST_CASE("wide fully-connected configuration trains without divergence") {
  auto arch = AeArchitecture::uniform({400, 100, 20}, Activation::Sigmoid);
  arch.epochs = 80;
  arch.learning_rate = 0.001;
  const Matrix x = low_rank01(60, 722, 5, 31);
  const auto m = ae_fit(x, arch, {1, 0});
  REQUIRE(m.training_history.size() == 80);
  for (const auto& e : m.training_history) CHECK(std::isfinite(e.train_mse));
  CHECK(m.training_history.back().train_mse < m.training_history.front().train_mse);
  CHECK(ae_encode(m, x).cols() == 20);
}

TEST_CASE("architecture validation and divergence") {
  const Matrix x = uniform01(10, 6, 1);
  auto arch = AeArchitecture::uniform({8}, Activation::Sigmoid);
  CHECK_THROWS_AS(ae_fit(x, arch, {1, 0}), ConfigError);
  arch = AeArchitecture::uniform({3}, Activation::Sigmoid);
  arch.validation_fraction = 1.0;
  CHECK_THROWS_AS(ae_fit(x, arch, {1, 0}), ConfigError);
  CHECK_THROWS_AS(ae_fit(uniform01(3, 6, 1), AeArchitecture::uniform({3}, Activation::Sigmoid), {1, 0}),
                  DataError);

  auto wild = AeArchitecture::uniform({3}, Activation::Relu);
  wild.output_activation = OutputActivation::Identity;
  wild.learning_rate = 1e300;
  wild.epochs = 5;
  CHECK_THROWS_WITH_AS(ae_fit(x * 1e150, wild, {1, 0}), doctest::Contains("epoch"), NumericalError);
}

TEST_CASE("model dump round trips bit-exactly") {
  auto arch = AeArchitecture::uniform({5, 2}, Activation::Relu);
  arch.encoder_activations[1] = Activation::Sigmoid;
  arch.epochs = 3;
  const auto m = ae_fit(uniform01(12, 7, 4), arch, {3, 1});
  std::stringstream buffer;
  save_model(m, buffer);
  const auto back = load_model(buffer);
  CHECK(back == m);

  testing::TempDir dir;
  save_model(m, dir.path() / "ae.txt");
  CHECK(load_model(dir.path() / "ae.txt") == m);

  std::stringstream broken("permsig-autoencoder 1\ninput_width x\n");
  CHECK_THROWS_AS(load_model(broken), DataError);
}
