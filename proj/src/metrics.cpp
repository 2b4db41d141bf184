#include "mnarppca/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mnarppca {

double rv_coefficient(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorKind::InvalidArgument, "RV coefficient needs equal column counts");
  }
  const Matrix ga = a.transpose() * a;
  const Matrix gb = b.transpose() * b;
  const double na = ga.squaredNorm();  // trace(ga^2), ga symmetric
  const double nb = gb.squaredNorm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::ZeroMatrix, "RV coefficient of a zero matrix");
  const double rv = (ga.cwiseProduct(gb)).sum() / std::sqrt(na * nb);
  return std::clamp(rv, 0.0, 1.0);
}

double prediction_error(const Matrix& y_hat, const Matrix& y_true, const Mask& omega) {
  if (y_hat.rows() != y_true.rows() || y_hat.cols() != y_true.cols() ||
      omega.rows() != y_true.rows() || omega.cols() != y_true.cols()) {
    throw Error(ErrorKind::InvalidArgument, "prediction error inputs differ in shape");
  }
  double num = 0.0, den = 0.0;
  Index missing = 0;
  for (Index i = 0; i < y_true.rows(); ++i) {
    for (Index j = 0; j < y_true.cols(); ++j) {
      if (omega(i, j)) continue;
      ++missing;
      const double d = y_hat(i, j) - y_true(i, j);
      num += d * d;
      den += y_true(i, j) * y_true(i, j);
    }
  }
  if (missing == 0) throw Error(ErrorKind::NoMissingCells, "no missing cells to score");
  if (den == 0.0) throw Error(ErrorKind::ZeroMatrix, "true values at missing cells are all zero");
  return num / den;
}

}  // namespace mnarppca
