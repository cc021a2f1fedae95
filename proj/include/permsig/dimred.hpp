#pragma once

#include <span>

#include "permsig/dataset.hpp"

namespace permsig {

enum class ReducerKind { Pls, Pca };

/// Affine projection x -> (x - mean) * directions. Each direction column has
/// unit norm.
struct LinearReducer {
  Vector mean;
  Matrix directions;  // N x r
  ReducerKind kind = ReducerKind::Pls;

  Eigen::Index input_width() const { return directions.rows(); }
  Eigen::Index components() const { return directions.cols(); }
};

/// First PLS component for a two-class problem. `signs` holds +1/-1 per row.
LinearReducer pls1_fit(const Matrix& x, std::span<const int> signs);

/// Top-r principal directions of the sample covariance, largest eigenvalue
/// first. Each direction is signed so its largest-magnitude entry is positive.
LinearReducer pca_fit(const Matrix& x, int r);

/// Eigenvalues matching the directions returned by pca_fit, for diagnostics.
Vector pca_eigenvalues(const Matrix& x, int r);

Matrix reduce(const LinearReducer& m, const Matrix& x);

}  // namespace permsig
