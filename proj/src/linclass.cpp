#include "permsig/linclass.hpp"

#include <cmath>
#include <limits>

#include "permsig/error.hpp"

namespace permsig {

namespace {

constexpr double kTau = 1e-12;

void check_signs(const Matrix& x, std::span<const int> signs) {
  if (static_cast<std::size_t>(x.rows()) != signs.size()) {
    throw DataError("label count does not match sample count");
  }
  bool pos = false;
  bool neg = false;
  for (int s : signs) {
    if (s != 1 && s != -1) throw DataError("binary labels must be +1 or -1");
    pos |= s == 1;
    neg |= s == -1;
  }
  if (!pos || !neg) throw DataError("binary classifier needs both classes present");
}

// Numerically safe log(1 + exp(-|z|)) + max(z, 0) style evaluation of the
// Platt negative log-likelihood term for target t and logit-negated input.
double platt_term(double t, double f_apb) {
  if (f_apb >= 0.0) return t * f_apb + std::log1p(std::exp(-f_apb));
  return (t - 1.0) * f_apb + std::log1p(std::exp(f_apb));
}

}  // namespace

Vector LinearSvm::decisions(const Matrix& x) const {
  if (x.cols() != weights.size()) {
    throw DataError("classifier expects " + std::to_string(weights.size()) + " features, got " +
                    std::to_string(x.cols()));
  }
  return (x * weights).array() + bias;
}

double svm_objective(const Matrix& x, std::span<const int> signs, const Vector& w, double b,
                     double c) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double y = signs[static_cast<std::size_t>(i)];
    hinge += std::max(0.0, 1.0 - y * (x.row(i).dot(w) + b));
  }
  return 0.5 * w.squaredNorm() + c * hinge;
}

LinearSvm svm_fit(const Matrix& x, std::span<const int> signs, double c,
                  const SvmOptions& options) {
  check_signs(x, signs);
  if (!(c > 0.0)) throw ConfigError("SVM regularization c must be positive");

  const Eigen::Index n = x.rows();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = signs[static_cast<std::size_t>(i)];

  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);  // Q alpha - e
  const Vector diag = x.rowwise().squaredNorm();

  auto upper = [&](Eigen::Index t) { return alpha(t) >= c; };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };

  const long long max_iter = static_cast<long long>(options.max_passes) * std::max<Eigen::Index>(n, 1);
  Vector kernel_i(n);
  Vector kernel_j(n);
  for (long long iter = 0; iter < max_iter; ++iter) {
    // Maximal violating index from the "up" set.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -grad(t) >= gmax) {
          gmax = -grad(t);
          i = t;
        }
      } else if (!lower(t) && grad(t) >= gmax) {
        gmax = grad(t);
        i = t;
      }
    }
    if (i < 0) break;
    kernel_i.noalias() = x * x.row(i).transpose();

    // Second-order choice of the partner index from the "low" set.
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad(t);
        gmax2 = std::max(gmax2, grad(t));
        if (diff > 0) {
          double quad = diag(i) + diag(t) - 2.0 * y(i) * kernel_i(t);
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad(t);
        gmax2 = std::max(gmax2, -grad(t));
        if (diff > 0) {
          double quad = diag(i) + diag(t) + 2.0 * y(i) * kernel_i(t);
          if (quad <= 0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      }
    }
    if (gmax + gmax2 < options.tolerance || j < 0) break;
    kernel_j.noalias() = x * x.row(j).transpose();

    const double q_ij = y(i) * y(j) * kernel_i(j);
    const double old_i = alpha(i);
    const double old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = diag(i) + diag(j) + 2.0 * q_ij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        }
      } else if (alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      double quad = diag(i) + diag(j) - 2.0 * q_ij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }

    const double d_i = alpha(i) - old_i;
    const double d_j = alpha(j) - old_j;
    // Q_ti = y_t y_i K_ti
    grad.array() += y.array() * (y(i) * d_i * kernel_i.array() + y(j) * d_j * kernel_j.array());
  }

  LinearSvm model;
  model.regularization_c = c;
  model.weights = x.transpose() * alpha.cwiseProduct(y);

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  model.bias = -rho;
  return model;
}

double Calibration::probability(double margin) const {
  const double z = slope * margin + intercept;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Calibration calibrate(std::span<const double> margins, std::span<const int> signs) {
  if (margins.size() != signs.size()) throw DataError("margin and label counts differ");
  double n_pos = 0;
  double n_neg = 0;
  for (int s : signs) {
    if (s == 1) ++n_pos;
    else if (s == -1) ++n_neg;
    else throw DataError("binary labels must be +1 or -1");
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("calibration needs both classes present");

  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  std::vector<double> target(signs.size());
  for (std::size_t i = 0; i < signs.size(); ++i) target[i] = signs[i] == 1 ? hi : lo;

  // Internally P(+1 | m) = 1 / (1 + exp(a m + b)).
  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) f += platt_term(target[i], margins[i] * aa + bb);
    return f;
  };
  double fval = objective(a, b);

  constexpr int max_iter = 100;
  constexpr double min_step = 1e-10;
  constexpr double sigma = 1e-12;
  constexpr double eps = 1e-8;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    double h11 = sigma;
    double h22 = sigma;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double f_apb = margins[i] * a + b;
      double p;
      double q;
      if (f_apb >= 0.0) {
        const double e = std::exp(-f_apb);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(f_apb);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
      const double d1 = target[i] - p;
      g1 += margins[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < eps && std::abs(g2) < eps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    bool moved = false;
    while (step >= min_step) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        moved = true;
        break;
      }
      step /= 2.0;
    }
    // No descent possible: the optimum is resolved to machine precision.
    if (!moved) break;
  }
  if (iter >= max_iter) {
    throw NumericalError("probability calibration did not converge in 100 Newton iterations");
  }
  return {-a, -b};
}

Vector PairModel::positive_probability(const Matrix& x) const {
  const Vector margins = projection ? svm.decisions(reduce(*projection, x)) : svm.decisions(x);
  Vector p(margins.size());
  for (Eigen::Index i = 0; i < margins.size(); ++i) p(i) = calibration.probability(margins(i));
  return p;
}

OvoClassifier ovo_fit(const Matrix& x, std::span<const int> labels, int class_count,
                      const OvoOptions& options) {
  if (class_count < 2) throw DataError("classification needs at least 2 classes");
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw DataError("label count does not match sample count");
  }
  OvoClassifier model;
  model.class_count = class_count;
  for (int a = 0; a < class_count; ++a) {
    for (int b = a + 1; b < class_count; ++b) {
      std::vector<Eigen::Index> rows;
      std::vector<int> signs;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == a || labels[i] == b) {
          rows.push_back(static_cast<Eigen::Index>(i));
          signs.push_back(labels[i] == b ? 1 : -1);
        }
      }
      Matrix sub = x(rows, Eigen::all);
      PairModel pair;
      pair.negative = a;
      pair.positive = b;
      if (options.pls_per_pair) {
        pair.projection = pls1_fit(sub, signs);
        sub = reduce(*pair.projection, sub);
      }
      pair.svm = svm_fit(sub, signs, options.c, options.svm);
      const Vector margins = pair.svm.decisions(sub);
      pair.calibration = calibrate(std::span<const double>(margins.data(), static_cast<std::size_t>(margins.size())), signs);
      model.pairs.push_back(std::move(pair));
    }
  }
  return model;
}

Matrix ovo_probabilities(const OvoClassifier& m, const Matrix& x) {
  const auto expected = static_cast<std::size_t>(m.class_count * (m.class_count - 1) / 2);
  if (m.class_count < 2 || m.pairs.size() != expected) {
    throw DataError("one-vs-one classifier is not fitted for every class pair");
  }
  Matrix scores = Matrix::Zero(x.rows(), m.class_count);
  for (const auto& pair : m.pairs) {
    const Vector p = pair.positive_probability(x);
    scores.col(pair.positive) += p;
    scores.col(pair.negative) += (1.0 - p.array()).matrix();
  }
  return scores / static_cast<double>(m.pairs.size());
}

std::vector<int> ovo_predict(const OvoClassifier& m, const Matrix& x) {
  const Matrix p = ovo_probabilities(m, x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = ensemble_label(p.row(i).transpose());
  }
  return out;
}

Vector ensemble_probability(const Matrix& per_region) {
  if (per_region.rows() == 0 || per_region.cols() == 0) {
    throw DataError("ensemble needs at least one region and one class");
  }
  for (Eigen::Index l = 0; l < per_region.rows(); ++l) {
    if (std::abs(per_region.row(l).sum() - 1.0) > 1e-9) {
      throw DataError("region " + std::to_string(l) + " probabilities do not sum to 1");
    }
  }
  return per_region.colwise().mean().transpose();
}

int ensemble_label(const Eigen::Ref<const Vector>& p_total) {
  if (p_total.size() == 0) throw DataError("argmax of an empty probability vector");
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p_total.size(); ++c) {
    if (p_total(c) > p_total(best)) best = c;
  }
  return static_cast<int>(best);
}

}  // namespace permsig
