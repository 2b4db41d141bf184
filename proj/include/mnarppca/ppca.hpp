#pragma once

#include "mnarppca/estimators.hpp"

namespace mnarppca {

struct LoadingEstimate {
  Matrix b_hat;        // r x p
  Vector eigenvalues;  // of sigma_hat - sigma2 I, descending, unfloored
  Index r = 0;
  double sigma2 = 0.0;

  /// B^T B + sigma2 I.
  Matrix gamma() const;
};

LoadingEstimate estimate_loadings(const Matrix& sigma_hat, Index r, double sigma2);

/// Gaussian conditional mean of every missing cell given the row's observed
/// non-MNAR cells, under N(alpha_hat, gamma). Observed cells are copied.
Matrix impute(const Dataset& data, const Vector& alpha_hat, const LoadingEstimate& loadings);
Matrix impute(const Dataset& data, const MomentEstimates& estimates,
              const LoadingEstimate& loadings);

/// Mean of the p - r smallest eigenvalues, floored at 0.
double estimate_noise(const Matrix& sigma_cc, Index r);

/// Covariance used for noise estimation: the complete-row sample covariance
/// when there are more complete rows than columns, else the pairwise
/// covariance of the non-MNAR block (which must have more than r columns).
Matrix noise_reference_covariance(const Dataset& data, Index r);

struct PipelineResult {
  MomentEstimates estimates;
  LoadingEstimate loadings;
  Matrix imputed;
  double sigma2 = 0.0;
};

/// Moments, loadings and imputation in one pass. A negative sigma2 means
/// "estimate it" via estimate_noise(noise_reference_covariance(...)).
PipelineResult mnar_pipeline(const Dataset& data, const EstimatorConfig& config, double sigma2);
PipelineResult mar_pipeline(const Dataset& data, const EstimatorConfig& config, double sigma2);

}  // namespace mnarppca
