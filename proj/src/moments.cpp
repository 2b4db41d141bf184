#include "mnarppca/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mnarppca {

namespace {

void check_cols(const IndexList& cols, Index p, const char* what) {
  for (Index c : cols) {
    if (c < 0 || c >= p) {
      throw Error(ErrorKind::OutOfRange,
                  std::string(what) + " column " + std::to_string(c) + " out of range");
    }
  }
}

std::string list_str(const IndexList& cols) {
  std::string s = "{";
  for (std::size_t t = 0; t < cols.size(); ++t) {
    if (t) s += ",";
    s += std::to_string(cols[t]);
  }
  return s + "}";
}

// Gathers `cols` over `rows` into a dense block.
Matrix gather(const Matrix& y, const IndexList& rows, const IndexList& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      out(static_cast<Index>(a), static_cast<Index>(b)) = y(rows[a], cols[b]);
  return out;
}

}  // namespace

double CcRegression::coefficient(Index col) const {
  for (std::size_t t = 0; t < regressors.size(); ++t)
    if (regressors[t] == col) return coefficients(static_cast<Index>(t));
  throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(col) + " is not a regressor");
}

CoefficientRecord CcRegression::record() const {
  CoefficientRecord rec;
  rec.response = response;
  rec.regressors = regressors;
  rec.intercept = intercept;
  rec.coefficients = coefficients;
  return rec;
}

IndexList cc_rows(const Mask& omega, const IndexList& needed_cols) {
  check_cols(needed_cols, omega.cols(), "needed");
  IndexList rows;
  rows.reserve(static_cast<std::size_t>(omega.rows()));
  for (Index i = 0; i < omega.rows(); ++i) {
    bool keep = true;
    for (Index c : needed_cols) {
      if (omega(i, c) == 0) {
        keep = false;
        break;
      }
    }
    if (keep) rows.push_back(i);
  }
  return rows;
}

CcRegression cc_ols(const Dataset& data, Index response, const IndexList& regressors,
                    const IndexList& condition_cols, double cond_threshold) {
  const Index p = data.cols();
  check_cols({response}, p, "response");
  check_cols(regressors, p, "regressor");
  check_cols(condition_cols, p, "condition");
  IndexList needed{response};
  needed.insert(needed.end(), regressors.begin(), regressors.end());
  needed.insert(needed.end(), condition_cols.begin(), condition_cols.end());
  const IndexList rows = cc_rows(data.omega, needed);
  const Index k = static_cast<Index>(regressors.size());
  const Index n = static_cast<Index>(rows.size());
  if (n < k + 2) {
    throw Error(ErrorKind::InsufficientRows,
                "regression of " + std::to_string(response) + " on " + list_str(regressors) +
                    " has " + std::to_string(n) + " complete rows, needs " +
                    std::to_string(k + 2));
  }

  Vector y(n);
  for (Index a = 0; a < n; ++a) y(a) = data.y(rows[static_cast<std::size_t>(a)], response);
  Matrix x = gather(data.y, rows, regressors);
  const double y_mean = y.mean();
  const Vector x_mean = x.colwise().mean();
  y.array() -= y_mean;
  x.rowwise() -= x_mean.transpose();

  CcRegression fit;
  fit.response = response;
  fit.regressors = regressors;
  fit.condition_cols = condition_cols;
  fit.n_used = n;
  if (k == 0) {
    fit.coefficients = Vector(0);
    fit.intercept = y_mean;
    fit.residual_variance = y.squaredNorm() / static_cast<double>(n - 1);
    return fit;
  }

  // Condition number of the column-equilibrated centered design.
  const Vector norms = x.colwise().norm();
  Matrix scaled = x;
  for (Index c = 0; c < k; ++c) {
    if (norms(c) == 0.0) {
      throw Error(ErrorKind::RankDeficientDesign,
                  "regressor " + std::to_string(regressors[static_cast<std::size_t>(c)]) +
                      " is constant on the complete rows");
    }
    scaled.col(c) /= norms(c);
  }
  Eigen::JacobiSVD<Matrix> svd(scaled);
  const Vector& sv = svd.singularValues();
  const double cond = sv(k - 1) > 0 ? sv(0) / sv(k - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_threshold)) {
    throw Error(ErrorKind::RankDeficientDesign,
                "design for " + std::to_string(response) + " on " + list_str(regressors) +
                    " has condition number " + std::to_string(cond));
  }

  fit.coefficients = x.colPivHouseholderQr().solve(y);
  fit.intercept = y_mean - x_mean.dot(fit.coefficients);
  const Vector resid = y - x * fit.coefficients;
  fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - k - 1);
  return fit;
}

Index ObservedMoments::position(Index col) const {
  for (std::size_t t = 0; t < cols.size(); ++t)
    if (cols[t] == col) return static_cast<Index>(t);
  throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(col) + " not in moments");
}

ObservedMoments observed_moments(const Dataset& data, const IndexList& cols) {
  check_cols(cols, data.cols(), "moment");
  const Index k = static_cast<Index>(cols.size());
  const Index n = data.rows();
  ObservedMoments out;
  out.cols = cols;
  out.mean = Vector::Zero(k);
  out.cov = Matrix::Zero(k, k);
  out.counts = decltype(out.counts)::Zero(k, k);

  for (Index a = 0; a < k; ++a) {
    const Index ca = cols[static_cast<std::size_t>(a)];
    double sum = 0.0;
    Index cnt = 0;
    for (Index i = 0; i < n; ++i) {
      if (data.omega(i, ca)) {
        sum += data.y(i, ca);
        ++cnt;
      }
    }
    if (cnt < 2) {
      throw Error(ErrorKind::TooFewObservations,
                  "column " + std::to_string(ca) + " has " + std::to_string(cnt) +
                      " observed entries");
    }
    out.mean(a) = sum / static_cast<double>(cnt);
  }

  for (Index a = 0; a < k; ++a) {
    const Index ca = cols[static_cast<std::size_t>(a)];
    for (Index b = a; b < k; ++b) {
      const Index cb = cols[static_cast<std::size_t>(b)];
      // Pair-specific means keep each covariance an ordinary sample covariance
      // of the jointly observed rows.
      double sa = 0.0, sb = 0.0;
      Index cnt = 0;
      for (Index i = 0; i < n; ++i) {
        if (data.omega(i, ca) && data.omega(i, cb)) {
          sa += data.y(i, ca);
          sb += data.y(i, cb);
          ++cnt;
        }
      }
      if (cnt < 2) {
        throw Error(ErrorKind::TooFewObservations,
                    "pair (" + std::to_string(ca) + ", " + std::to_string(cb) + ") has " +
                        std::to_string(cnt) + " jointly observed rows");
      }
      const double ma = sa / static_cast<double>(cnt);
      const double mb = sb / static_cast<double>(cnt);
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (data.omega(i, ca) && data.omega(i, cb)) {
          acc += (data.y(i, ca) - ma) * (data.y(i, cb) - mb);
        }
      }
      const double c = acc / static_cast<double>(cnt - 1);
      out.cov(a, b) = c;
      out.cov(b, a) = c;
      out.counts(a, b) = cnt;
      out.counts(b, a) = cnt;
    }
  }
  return out;
}

double cc_conditional_residual_variance(const Dataset& data, Index j,
                                        const IndexList& condition_cols) {
  const Index p = data.cols();
  check_cols({j}, p, "response");
  check_cols(condition_cols, p, "condition");
  IndexList all(static_cast<std::size_t>(p));
  for (Index c = 0; c < p; ++c) all[static_cast<std::size_t>(c)] = c;
  const IndexList rows = cc_rows(data.omega, all);
  const Index n = static_cast<Index>(rows.size());
  if (n < p + 2) {
    throw Error(ErrorKind::InsufficientRows,
                "conditional residual variance of " + std::to_string(j) + " needs " +
                    std::to_string(p + 2) + " fully observed rows, found " + std::to_string(n));
  }
  IndexList others;
  for (Index c = 0; c < p; ++c)
    if (c != j) others.push_back(c);
  Matrix x = gather(data.y, rows, others);
  Vector y(n);
  for (Index a = 0; a < n; ++a) y(a) = data.y(rows[static_cast<std::size_t>(a)], j);
  y.array() -= y.mean();
  x.rowwise() -= x.colwise().mean();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
  const Vector beta = cod.solve(y);
  const Vector resid = y - x * beta;
  const double v = resid.squaredNorm() / static_cast<double>(n - (p - 1) - 1);
  return std::max(0.0, v);
}

}  // namespace mnarppca
