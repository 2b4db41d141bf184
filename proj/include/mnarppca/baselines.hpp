#pragma once

#include "mnarppca/model.hpp"

namespace mnarppca {

Matrix mean_impute(const Dataset& data);

struct ListwiseStats {
  Vector mean;
  Matrix cov;
  Index n_used = 0;
};

ListwiseStats listwise_stats(const Dataset& data);

struct SoftImputeResult {
  Matrix completed;
  Index iterations = 0;
  double final_change = 0.0;
  bool converged = false;
};

/// Soft-thresholded SVD iterations on the data centered by observed column
/// means. `init` (centered scale, n x p) warm-starts the low-rank iterate; an
/// empty matrix starts from zero. With `strict`, failing to reach `tol`
/// within `max_iter` throws NonConvergence.
SoftImputeResult soft_impute(const Dataset& data, double lambda, Index max_iter = 1000,
                             double tol = 1e-5, const Matrix& init = Matrix(),
                             bool strict = false);

struct OracleSoftImpute {
  double lambda = 0.0;
  double pred_error = 0.0;
  Matrix completed;
  std::vector<double> grid;
};

/// Searches `grid_size` log-spaced lambdas over [0.01, 1] x the top singular
/// value of the mean-filled centered matrix and keeps the one with the
/// smallest true prediction error.
OracleSoftImpute soft_impute_oracle(const Dataset& data, const Matrix& truth, Index grid_size = 20,
                                    Index max_iter = 1000, double tol = 1e-5);

/// Unbiased sample covariance of a complete matrix.
Matrix sample_covariance(const Matrix& y);

}  // namespace mnarppca
