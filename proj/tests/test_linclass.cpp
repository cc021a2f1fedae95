#include <doctest.h>

#include <cmath>
#include <numeric>

#include "permsig/error.hpp"
#include "permsig/linclass.hpp"

using namespace permsig;

namespace {

struct Labelled {
  Matrix x;
  std::vector<int> signs;
};

Labelled noisy_blobs(int n, int dim, double shift, std::uint64_t seed) {
  auto s = PermutationPlan{seed, 0}.stream(StreamTag::Synth);
  Labelled out{Matrix(n, dim), std::vector<int>(n)};
  for (int i = 0; i < n; ++i) {
    out.signs[i] = i % 2 == 0 ? 1 : -1;
    for (int j = 0; j < dim; ++j) out.x(i, j) = s.normal() + (j == 0 ? shift * out.signs[i] : 0.0);
  }
  return out;
}

// Coarse-to-fine grid search over (w1, w2, b); the objective is convex so
// shrinking a 21^3 grid around the best point converges to the minimum.
double grid_minimum(const Matrix& x, std::span<const int> y, double c) {
  Vector centre = Vector::Zero(3);
  double radius = 4.0;
  double best = svm_objective(x, y, centre.head(2), centre(2), c);
  for (int round = 0; round < 40; ++round) {
    Vector next = centre;
    for (int a = -10; a <= 10; ++a) {
      for (int b = -10; b <= 10; ++b) {
        for (int e = -10; e <= 10; ++e) {
          const Vector p = centre + radius / 10.0 * Vector{{double(a), double(b), double(e)}};
          const double v = svm_objective(x, y, p.head(2), p(2), c);
          if (v < best) {
            best = v;
            next = p;
          }
        }
      }
    }
    centre = next;
    radius *= 0.6;
  }
  return best;
}

}  // namespace

TEST_CASE("separable line gets the maximum-margin solution") {
  Matrix x{{-2.0}, {-1.0}, {1.0}, {2.0}};
  const std::vector<int> y{-1, -1, 1, 1};
  const auto svm = svm_fit(x, y, 1.0);
  CHECK(svm.weights(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(svm.bias == doctest::Approx(0.0).epsilon(1e-5));
  const Vector d = svm.decisions(x);
  for (int i = 0; i < 4; ++i) CHECK(d(i) * y[i] > 0.99);
}

TEST_CASE("XOR has no useful linear separator") {
  Matrix x{{0.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {1.0, 0.0}};
  const std::vector<int> y{-1, -1, 1, 1};
  const auto svm = svm_fit(x, y, 1.0);
  CHECK(svm.weights.norm() < 1e-6);
  CHECK(std::abs(svm.bias) < 1e-6);
}

TEST_CASE("dual solver reaches the primal optimum") {
  for (const double c : {0.1, 1.0, 10.0}) {
    CAPTURE(c);
    const auto data = noisy_blobs(40, 2, 1.0, 17);
    const auto svm = svm_fit(data.x, data.signs, c);
    const double ours = svm_objective(data.x, data.signs, svm.weights, svm.bias, c);
    const double oracle = grid_minimum(data.x, data.signs, c);
    CHECK(ours <= oracle + 1e-4);
    CHECK(ours >= oracle - 1e-4);
  }
}

TEST_CASE("solver rejects bad input") {
  Matrix x{{0.0}, {1.0}};
  const std::vector<int> y{1, 1};
  CHECK_THROWS_AS(svm_fit(x, y, 1.0), DataError);
  const std::vector<int> ok{-1, 1};
  CHECK_THROWS_AS(svm_fit(x, ok, 0.0), ConfigError);
}

TEST_CASE("calibration") {
  SUBCASE("monotone in the margin when margins carry signal") {
    const auto data = noisy_blobs(200, 1, 1.0, 3);
    std::vector<double> m(200);
    for (int i = 0; i < 200; ++i) m[i] = data.x(i, 0);
    const auto cal = calibrate(m, data.signs);
    CHECK(cal.slope > 0.0);
    double prev = 0.0;
    for (double t = -3.0; t <= 3.0; t += 0.25) {
      const double p = cal.probability(t);
      CHECK(p > prev);
      CHECK(p < 1.0);
      prev = p;
    }
  }
  SUBCASE("uninformative margins give roughly one half") {
    auto s = PermutationPlan{11, 0}.stream(StreamTag::Synth);
    std::vector<double> m(400);
    std::vector<int> y(400);
    for (int i = 0; i < 400; ++i) {
      m[i] = s.normal();
      y[i] = i % 2 == 0 ? 1 : -1;
    }
    const auto cal = calibrate(m, y);
    for (const double t : {-1.0, 0.0, 1.0}) CHECK(std::abs(cal.probability(t) - 0.5) < 0.05);
  }
  SUBCASE("constant margins give the smoothed base rate") {
    std::vector<double> m(40, 0.0);
    std::vector<int> y(40, -1);
    std::fill(y.begin(), y.begin() + 30, 1);
    const auto cal = calibrate(m, y);
    CHECK(std::abs(cal.probability(0.0) - 0.75) < 0.01);
  }
  SUBCASE("separable margins still converge") {
    std::vector<double> m{-3, -2, -1, 1, 2, 3};
    std::vector<int> y{-1, -1, -1, 1, 1, 1};
    const auto cal = calibrate(m, y);
    CHECK(std::isfinite(cal.slope));
    CHECK(cal.probability(3.0) > 0.8);
    CHECK(cal.probability(-3.0) < 0.2);
  }
}

TEST_CASE("ensemble arithmetic") {
  Matrix two{{0.2, 0.8}, {0.4, 0.6}};
  const Vector p = ensemble_probability(two);
  CHECK(p(0) == doctest::Approx(0.3));
  CHECK(p(1) == doctest::Approx(0.7));
  CHECK(ensemble_label(p) == 1);

  const Matrix flat = Matrix::Constant(10, 4, 0.25);
  const Vector u = ensemble_probability(flat);
  for (int c = 0; c < 4; ++c) CHECK(u(c) == doctest::Approx(0.25));
  CHECK(ensemble_label(u) == 0);

  CHECK(ensemble_label(Vector{{0.1, 0.45, 0.45}}) == 1);
  CHECK(ensemble_label(Vector{{0.2, 0.3, 0.5}}) == ensemble_label(Vector{{2.0, 3.0, 5.0}}));

  CHECK_THROWS(ensemble_probability(Matrix{{0.3, 0.3}}));
  CHECK_THROWS(ensemble_probability(Matrix(0, 3)));
}

TEST_CASE("one-vs-one combination") {
  SUBCASE("two classes reduce to the single pair") {
    const auto data = noisy_blobs(60, 3, 1.5, 5);
    std::vector<int> labels(60);
    for (int i = 0; i < 60; ++i) labels[i] = data.signs[i] > 0 ? 1 : 0;
    const auto m = ovo_fit(data.x, labels, 2, {});
    REQUIRE(m.pairs.size() == 1);
    const Matrix p = ovo_probabilities(m, data.x);
    const Vector pos = m.pairs[0].positive_probability(data.x);
    for (int i = 0; i < 60; ++i) {
      CHECK(p(i, 1) == doctest::Approx(pos(i)));
      CHECK(p(i, 0) == doctest::Approx(1.0 - pos(i)));
    }
    int correct = 0;
    const auto pred = ovo_predict(m, data.x);
    for (int i = 0; i < 60; ++i) correct += pred[i] == labels[i];
    CHECK(correct >= 50);
  }
  SUBCASE("pair votes are summed and normalised") {
    OvoClassifier m;
    m.class_count = 3;
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) {
        PairModel pair;
        pair.negative = a;
        pair.positive = b;
        pair.svm.weights = Vector::Zero(2);
        m.pairs.push_back(pair);
      }
    }
    const Matrix x = Matrix::Ones(2, 2);
    Matrix p = ovo_probabilities(m, x);
    for (int c = 0; c < 3; ++c) CHECK(p(0, c) == doctest::Approx(1.0 / 3.0));
    for (auto& pair : m.pairs) pair.calibration.intercept = 60.0;  // certain for the higher class
    p = ovo_probabilities(m, x);
    CHECK(p(0, 0) == doctest::Approx(0.0));
    CHECK(p(0, 1) == doctest::Approx(1.0 / 3.0));
    CHECK(p(0, 2) == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("four classes with per-pair projection") {
    auto s = PermutationPlan{2, 0}.stream(StreamTag::Synth);
    const int n = 80;
    Matrix x(n, 5);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = i % 4;
      for (int j = 0; j < 5; ++j) x(i, j) = s.normal() + (j < 4 && j == labels[i] ? 3.0 : 0.0);
    }
    OvoOptions opt;
    opt.pls_per_pair = true;
    const auto m = ovo_fit(x, labels, 4, opt);
    CHECK(m.pairs.size() == 6);
    const Matrix p = ovo_probabilities(m, x);
    for (int i = 0; i < n; ++i) CHECK(p.row(i).sum() == doctest::Approx(1.0));
    CHECK((p.array() >= 0.0).all());
    const auto pred = ovo_predict(m, x);
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += pred[i] == labels[i];
    CHECK(correct >= 70);
  }
}

TEST_CASE("decisions do not depend on feature order") {
  const auto data = noisy_blobs(50, 4, 0.8, 23);
  const Eigen::PermutationMatrix<Eigen::Dynamic> perm(Eigen::VectorXi{{2, 0, 3, 1}});
  const Matrix shuffled = data.x * perm;
  const auto a = svm_fit(data.x, data.signs, 1.0);
  const auto b = svm_fit(shuffled, data.signs, 1.0);
  const Vector da = a.decisions(data.x);
  const Vector db = b.decisions(shuffled);
  // The two runs stop at different points inside the 1e-6 KKT tolerance.
  CHECK((da - db).cwiseAbs().maxCoeff() < 1e-4);
  for (int i = 0; i < 50; ++i) CHECK((da(i) > 0) == (db(i) > 0));
}
