#include "mnarppca/ppca.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mnarppca/baselines.hpp"

namespace mnarppca {

Matrix LoadingEstimate::gamma() const {
  Matrix g = b_hat.transpose() * b_hat;
  g.diagonal().array() += sigma2;
  return g;
}

LoadingEstimate estimate_loadings(const Matrix& sigma_hat, Index r, double sigma2) {
  const Index p = sigma_hat.rows();
  if (sigma_hat.cols() != p) throw Error(ErrorKind::NonSymmetric, "covariance must be square");
  if (r < 1 || r >= p) {
    throw Error(ErrorKind::OutOfRange, "rank " + std::to_string(r) + " outside [1, p)");
  }
  if (!sigma_hat.allFinite()) throw Error(ErrorKind::InvalidArgument, "covariance has non-finite entries");
  const double scale = std::max(1.0, sigma_hat.cwiseAbs().maxCoeff());
  if ((sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorKind::NonSymmetric, "covariance estimate is not symmetric");
  }
  Matrix shifted = sigma_hat;
  shifted.diagonal().array() -= sigma2;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(shifted);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::NonConvergence, "eigendecomposition failed");
  }
  LoadingEstimate out;
  out.r = r;
  out.sigma2 = sigma2;
  out.eigenvalues = eig.eigenvalues().reverse();
  out.b_hat.resize(r, p);
  for (Index k = 0; k < r; ++k) {
    Vector u = eig.eigenvectors().col(p - 1 - k);
    Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0) u = -u;
    out.b_hat.row(k) = std::sqrt(std::max(out.eigenvalues(k), 0.0)) * u.transpose();
  }
  return out;
}

Matrix impute(const Dataset& data, const Vector& alpha_hat, const LoadingEstimate& loadings) {
  const Index n = data.rows();
  const Index p = data.cols();
  if (alpha_hat.size() != p || loadings.b_hat.cols() != p) {
    throw Error(ErrorKind::InvalidArgument, "estimate dimensions do not match the data");
  }
  const Matrix gamma = loadings.gamma();
  std::vector<bool> is_mnar(static_cast<std::size_t>(p), false);
  for (Index m : data.mnar_vars) is_mnar[static_cast<std::size_t>(m)] = true;

  struct Plan {
    IndexList missing;
    IndexList cond;
    Matrix weights;  // |missing| x |cond|
  };
  std::map<std::vector<std::uint8_t>, Plan> plans;

  Matrix out = data.y;
  for (Index i = 0; i < n; ++i) {
    std::vector<std::uint8_t> pattern(static_cast<std::size_t>(p));
    bool any_missing = false;
    for (Index j = 0; j < p; ++j) {
      pattern[static_cast<std::size_t>(j)] = data.omega(i, j);
      any_missing = any_missing || data.omega(i, j) == 0;
    }
    if (!any_missing) continue;

    auto it = plans.find(pattern);
    if (it == plans.end()) {
      Plan plan;
      for (Index j = 0; j < p; ++j) {
        if (data.omega(i, j) == 0) {
          plan.missing.push_back(j);
        } else if (!is_mnar[static_cast<std::size_t>(j)]) {
          plan.cond.push_back(j);
        }
      }
      const Index u = static_cast<Index>(plan.missing.size());
      const Index c = static_cast<Index>(plan.cond.size());
      plan.weights = Matrix::Zero(u, c);
      if (c > 0) {
        Matrix g_cc(c, c), g_uc(u, c);
        for (Index a = 0; a < c; ++a)
          for (Index b = 0; b < c; ++b)
            g_cc(a, b) = gamma(plan.cond[static_cast<std::size_t>(a)], plan.cond[static_cast<std::size_t>(b)]);
        for (Index a = 0; a < u; ++a)
          for (Index b = 0; b < c; ++b)
            g_uc(a, b) = gamma(plan.missing[static_cast<std::size_t>(a)], plan.cond[static_cast<std::size_t>(b)]);
        // Minimum-norm solve: exact interpolation when gamma is rank deficient.
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(g_cc);
        plan.weights = cod.solve(g_uc.transpose()).transpose();
        if (!plan.weights.allFinite()) {
          throw Error(ErrorKind::SingularConditioningBlock,
                      "conditioning block for row " + std::to_string(i) + " is not solvable");
        }
      }
      it = plans.emplace(pattern, std::move(plan)).first;
    }
    const Plan& plan = it->second;
    const Index c = static_cast<Index>(plan.cond.size());
    Vector centered(c);
    for (Index b = 0; b < c; ++b) {
      const Index col = plan.cond[static_cast<std::size_t>(b)];
      centered(b) = data.y(i, col) - alpha_hat(col);
    }
    const Vector fill = plan.weights * centered;
    for (std::size_t a = 0; a < plan.missing.size(); ++a) {
      const Index col = plan.missing[a];
      out(i, col) = alpha_hat(col) + fill(static_cast<Index>(a));
    }
  }
  return out;
}

Matrix impute(const Dataset& data, const MomentEstimates& estimates,
              const LoadingEstimate& loadings) {
  return impute(data, estimates.alpha_hat, loadings);
}

double estimate_noise(const Matrix& sigma_cc, Index r) {
  const Index p = sigma_cc.rows();
  if (sigma_cc.cols() != p) throw Error(ErrorKind::InvalidArgument, "covariance must be square");
  if (r < 0 || r >= p) {
    throw Error(ErrorKind::OutOfRange, "rank " + std::to_string(r) + " outside [0, p)");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_cc, Eigen::EigenvaluesOnly);
  // Ascending order: the first p - r are the smallest.
  const double mean = eig.eigenvalues().head(p - r).mean();
  return std::max(0.0, mean);
}

Matrix noise_reference_covariance(const Dataset& data, Index r) {
  const Index p = data.cols();
  IndexList all(static_cast<std::size_t>(p));
  for (Index c = 0; c < p; ++c) all[static_cast<std::size_t>(c)] = c;
  const IndexList rows = cc_rows(data.omega, all);
  if (static_cast<Index>(rows.size()) > p) return listwise_stats(data).cov;
  const IndexList non_mnar = data.non_mnar_vars();
  if (static_cast<Index>(non_mnar.size()) <= r) {
    throw Error(ErrorKind::InsufficientRows,
                "too few complete rows and too few non-MNAR columns to estimate the noise");
  }
  return observed_moments(data, non_mnar).cov;
}

namespace {

PipelineResult finish(const Dataset& data, MomentEstimates est, const EstimatorConfig& config,
                      double sigma2) {
  PipelineResult res;
  res.sigma2 = sigma2 >= 0.0 ? sigma2
                             : estimate_noise(noise_reference_covariance(data, config.rank),
                                              config.rank);
  res.loadings = estimate_loadings(est.sigma_hat, config.rank, res.sigma2);
  res.imputed = impute(data, est.alpha_hat, res.loadings);
  res.estimates = std::move(est);
  return res;
}

}  // namespace

PipelineResult mnar_pipeline(const Dataset& data, const EstimatorConfig& config, double sigma2) {
  return finish(data, assemble_sigma(data, config), config, sigma2);
}

PipelineResult mar_pipeline(const Dataset& data, const EstimatorConfig& config, double sigma2) {
  return finish(data, assemble_sigma_mar(data, config), config, sigma2);
}

}  // namespace mnarppca
