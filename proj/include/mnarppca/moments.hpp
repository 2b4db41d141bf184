#pragma once

#include "mnarppca/model.hpp"

namespace mnarppca {

/// Complete-case least-squares fit of `response` on `regressors` over the rows
/// where the response, every regressor and every `condition_cols` entry is
/// observed.
struct CcRegression {
  Index response = 0;
  IndexList regressors;
  IndexList condition_cols;
  double intercept = 0.0;
  Vector coefficients;
  double residual_variance = 0.0;
  Index n_used = 0;

  double coefficient(Index col) const;
  CoefficientRecord record() const;
};

/// Rows where every column of `needed_cols` is observed, ascending.
IndexList cc_rows(const Mask& omega, const IndexList& needed_cols);

CcRegression cc_ols(const Dataset& data, Index response, const IndexList& regressors,
                    const IndexList& condition_cols = {},
                    double cond_threshold = kConditionThreshold);

/// Pairwise-deletion moments of the requested columns. `cov(a, b)` is indexed
/// by position in `cols`; its diagonal holds the variances.
struct ObservedMoments {
  IndexList cols;
  Vector mean;
  Matrix cov;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> counts;

  Index position(Index col) const;
};

ObservedMoments observed_moments(const Dataset& data, const IndexList& cols);

/// Residual variance of Y_j regressed on all other columns, restricted to rows
/// where every column is observed (the conditioning columns are then observed
/// too). Uses a minimum-norm solve so exactly collinear regressors are fine.
double cc_conditional_residual_variance(const Dataset& data, Index j,
                                        const IndexList& condition_cols);

}  // namespace mnarppca
