#include "permsig/dimred.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "permsig/error.hpp"

namespace permsig {

namespace {

Matrix centered(const Matrix& x, const Vector& mean) {
  return x.rowwise() - mean.transpose();
}

Eigen::SelfAdjointEigenSolver<Matrix> covariance_eigen(const Matrix& x, int r) {
  if (x.rows() < 2) throw DataError("PCA needs at least 2 samples");
  const auto limit = std::min(x.rows() - 1, x.cols());
  if (r < 1 || r > limit) {
    throw ConfigError("PCA component count " + std::to_string(r) + " outside 1.." +
                      std::to_string(limit));
  }
  const Vector mean = x.colwise().mean();
  const Matrix xc = centered(x, mean);
  const Matrix cov = (xc.transpose() * xc) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("PCA eigen-decomposition failed");
  return solver;
}

}  // namespace

LinearReducer pls1_fit(const Matrix& x, std::span<const int> signs) {
  if (x.rows() < 2) throw DataError("PLS needs at least 2 samples");
  if (static_cast<std::size_t>(x.rows()) != signs.size()) {
    throw DataError("PLS label count does not match sample count");
  }
  bool has_pos = false;
  bool has_neg = false;
  Vector y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int s = signs[static_cast<std::size_t>(i)];
    if (s != 1 && s != -1) throw DataError("PLS labels must be +1 or -1");
    has_pos |= s == 1;
    has_neg |= s == -1;
    y(i) = s;
  }
  if (!has_pos || !has_neg) throw DataError("PLS needs both label signs present");

  LinearReducer m;
  m.kind = ReducerKind::Pls;
  m.mean = x.colwise().mean();
  const Vector yc = y.array() - y.mean();
  const Matrix xc = centered(x, m.mean);
  const Vector w = xc.transpose() * yc;
  const double norm = w.norm();
  if (!(norm > 1e-12 * xc.norm() * yc.norm()) || norm == 0.0) {
    throw NumericalError("PLS direction is degenerate: features carry no covariance with labels");
  }
  m.directions = w / norm;
  return m;
}

LinearReducer pca_fit(const Matrix& x, int r) {
  const auto solver = covariance_eigen(x, r);
  LinearReducer m;
  m.kind = ReducerKind::Pca;
  m.mean = x.colwise().mean();
  const Eigen::Index n = x.cols();
  m.directions.resize(n, r);
  for (int j = 0; j < r; ++j) {
    // eigenvalues come back ascending
    Vector v = solver.eigenvectors().col(n - 1 - j).normalized();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    m.directions.col(j) = v;
  }
  return m;
}

Vector pca_eigenvalues(const Matrix& x, int r) {
  const auto solver = covariance_eigen(x, r);
  const Eigen::Index n = x.cols();
  Vector values(r);
  for (int j = 0; j < r; ++j) values(j) = solver.eigenvalues()(n - 1 - j);
  return values;
}

Matrix reduce(const LinearReducer& m, const Matrix& x) {
  if (x.cols() != m.input_width()) {
    throw DataError("reducer expects " + std::to_string(m.input_width()) + " columns, got " +
                    std::to_string(x.cols()));
  }
  return centered(x, m.mean) * m.directions;
}

}  // namespace permsig
