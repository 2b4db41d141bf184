#pragma once

// Population-level helpers shared by the unit tests and the acceptance run.

#include <functional>
#include <optional>

#include "mnarppca/model.hpp"

namespace oracle {

using namespace mnarppca;

inline std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

/// Least-squares projection of Y_response on `regs` under the model itself.
struct PopulationFit {
  CoefficientRecord rel;
  double residual_variance = 0.0;
};

inline PopulationFit population_ols(const PpcaParams& params, Index response, const IndexList& regs) {
  const Matrix sigma = population_covariance(params);
  const Index k = static_cast<Index>(regs.size());
  Matrix sxx(k, k);
  Vector sxy(k);
  for (Index a = 0; a < k; ++a) {
    sxy(a) = sigma(regs[a], response);
    for (Index b = 0; b < k; ++b) sxx(a, b) = sigma(regs[a], regs[b]);
  }
  PopulationFit fit;
  fit.rel.response = response;
  fit.rel.regressors = regs;
  fit.rel.coefficients = sxx.ldlt().solve(sxy);
  fit.rel.intercept = params.alpha(response);
  for (Index a = 0; a < k; ++a) fit.rel.intercept -= fit.rel.coefficients(a) * params.alpha(regs[a]);
  fit.residual_variance = sigma(response, response) - sxy.dot(fit.rel.coefficients);
  return fit;
}

inline double rel_err(double est, double truth) {
  return std::abs(est - truth) / std::max(1.0, std::abs(truth));
}

/// Complete data, all cells observed, with the given roles.
inline Dataset full_dataset(const Matrix& y, IndexList mnar, IndexList pivots) {
  return Dataset::from_complete(y, Mask::Ones(y.rows(), y.cols()), std::move(mnar), std::move(pivots));
}

/// Self-masked logistic missingness on `cols`, ~`rate` missing each.
inline Dataset self_masked_dataset(const PpcaParams& params, const Matrix& y, const IndexList& cols,
                                   const IndexList& pivots, double rate, double slope,
                                   std::uint64_t seed) {
  const Matrix sigma = population_covariance(params);
  MechanismMap specs;
  for (Index m : cols) {
    const double sd = std::sqrt(sigma(m, m));
    const double phi0 =
        calibrate_intercept(MechanismKind::SelfMaskedLogistic, params.alpha(m), sd, slope / sd, rate);
    specs[m] = MechanismSpec::self_masked_logistic(phi0, slope / sd);
  }
  return Dataset::from_complete(y, apply_mechanism(y, specs, seed), cols, pivots);
}

}  // namespace oracle
