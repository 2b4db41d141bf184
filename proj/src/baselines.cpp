#include "mnarppca/baselines.hpp"

#include <cmath>
#include <limits>

#include "mnarppca/metrics.hpp"
#include "mnarppca/moments.hpp"

namespace mnarppca {

namespace {

Vector observed_column_means(const Dataset& data) {
  const Index p = data.cols();
  Vector mean(p);
  for (Index j = 0; j < p; ++j) {
    double s = 0.0;
    Index cnt = 0;
    for (Index i = 0; i < data.rows(); ++i) {
      if (data.omega(i, j)) {
        s += data.y(i, j);
        ++cnt;
      }
    }
    if (cnt == 0) {
      throw Error(ErrorKind::EmptyColumn, "column " + std::to_string(j) + " has no observed entry");
    }
    mean(j) = s / static_cast<double>(cnt);
  }
  return mean;
}

// Soft-thresholded reconstruction of x via the eigendecomposition of x^T x
// (p is small next to n, so this is the cheap route to the thin SVD).
Matrix shrink(const Matrix& x, double lambda) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(x.transpose() * x);
  const Vector& ev = eig.eigenvalues();
  const Matrix& v = eig.eigenvectors();
  const Index p = x.cols();
  Vector factor = Vector::Zero(p);
  const double floor = std::max(ev.maxCoeff(), 0.0) * 1e-24;
  for (Index k = 0; k < p; ++k) {
    if (ev(k) <= floor) continue;
    const double s = std::sqrt(ev(k));
    factor(k) = std::max(s - lambda, 0.0) / s;
  }
  return x * (v * factor.asDiagonal() * v.transpose());
}

}  // namespace

Matrix mean_impute(const Dataset& data) {
  const Vector mean = observed_column_means(data);
  Matrix out = data.y;
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j)
      if (!data.omega(i, j)) out(i, j) = mean(j);
  return out;
}

Matrix sample_covariance(const Matrix& y) {
  if (y.rows() < 2) throw Error(ErrorKind::InsufficientRows, "covariance needs two rows");
  const Matrix centered = y.rowwise() - y.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(y.rows() - 1);
}

ListwiseStats listwise_stats(const Dataset& data) {
  IndexList all;
  for (Index j = 0; j < data.cols(); ++j) all.push_back(j);
  const IndexList rows = cc_rows(data.omega, all);
  if (rows.size() < 2) {
    throw Error(ErrorKind::InsufficientRows,
                "listwise deletion leaves " + std::to_string(rows.size()) + " rows");
  }
  Matrix sub(static_cast<Index>(rows.size()), data.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) sub.row(static_cast<Index>(a)) = data.y.row(rows[a]);
  ListwiseStats out;
  out.mean = sub.colwise().mean().transpose();
  out.cov = sample_covariance(sub);
  out.n_used = static_cast<Index>(rows.size());
  return out;
}

SoftImputeResult soft_impute(const Dataset& data, double lambda, Index max_iter, double tol,
                             const Matrix& init, bool strict) {
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  const Index n = data.rows();
  const Index p = data.cols();
  const Vector mean = observed_column_means(data);
  Matrix observed = Matrix::Zero(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j)
      if (data.omega(i, j)) observed(i, j) = data.y(i, j) - mean(j);

  Matrix z = init.size() == 0 ? Matrix::Zero(n, p) : init;
  if (z.rows() != n || z.cols() != p) throw Error(ErrorKind::InvalidArgument, "init has wrong shape");

  SoftImputeResult res;
  for (Index it = 1; it <= max_iter; ++it) {
    Matrix filled = z;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < p; ++j)
        if (data.omega(i, j)) filled(i, j) = observed(i, j);
    Matrix next = shrink(filled, lambda);
    const double denom = z.squaredNorm();
    const double diff = (next - z).squaredNorm();
    res.final_change = denom > 0.0 ? diff / denom : (diff > 0.0 ? 1.0 : 0.0);
    z = std::move(next);
    res.iterations = it;
    if (res.final_change < tol) {
      res.converged = true;
      break;
    }
  }
  if (strict && !res.converged) {
    throw Error(ErrorKind::NonConvergence,
                "soft-impute stopped after " + std::to_string(res.iterations) +
                    " iterations with relative change " + std::to_string(res.final_change));
  }
  res.completed = z;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      res.completed(i, j) = data.omega(i, j) ? data.y(i, j) : z(i, j) + mean(j);
    }
  }
  return res;
}

OracleSoftImpute soft_impute_oracle(const Dataset& data, const Matrix& truth, Index grid_size,
                                    Index max_iter, double tol) {
  if (grid_size < 1) throw Error(ErrorKind::InvalidArgument, "grid size must be positive");
  const Vector mean = observed_column_means(data);
  Matrix filled = Matrix::Zero(data.rows(), data.cols());
  for (Index i = 0; i < data.rows(); ++i)
    for (Index j = 0; j < data.cols(); ++j)
      if (data.omega(i, j)) filled(i, j) = data.y(i, j) - mean(j);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(filled.transpose() * filled, Eigen::EigenvaluesOnly);
  const double top = std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));

  OracleSoftImpute best;
  best.pred_error = std::numeric_limits<double>::infinity();
  // Largest lambda first so each fit warm-starts the next, smaller one.
  Matrix warm;
  for (Index g = 0; g < grid_size; ++g) {
    const double frac =
        grid_size == 1 ? 1.0
                       : std::pow(10.0, -2.0 * static_cast<double>(g) / static_cast<double>(grid_size - 1));
    const double lambda = frac * top;
    best.grid.push_back(lambda);
    SoftImputeResult fit = soft_impute(data, lambda, max_iter, tol, warm);
    warm = fit.completed;
    for (Index i = 0; i < data.rows(); ++i)
      for (Index j = 0; j < data.cols(); ++j) warm(i, j) -= mean(j);
    const double err = prediction_error(fit.completed, truth, data.omega);
    if (err < best.pred_error) {
      best.pred_error = err;
      best.lambda = lambda;
      best.completed = std::move(fit.completed);
    }
  }
  return best;
}

}  // namespace mnarppca
