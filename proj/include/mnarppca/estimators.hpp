#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mnarppca/moments.hpp"

namespace mnarppca {

/// How the conditional residual variance of a pivot regression is estimated.
/// SameRegression: residual variance of the complete-case fit the system
/// already uses. FullRows: regress on all other columns over fully observed
/// rows (needs at least p + 2 such rows).
enum class QcPolicy { SameRegression, FullRows };

const char* to_string(QcPolicy policy);
QcPolicy qc_policy_from_string(const std::string& name);

struct EstimatorConfig {
  Index rank = 2;
  Index max_combos = 300;
  std::uint64_t seed = 0;
  double cond_threshold = kConditionThreshold;
  double denom_rel = 1e-8;
  QcPolicy qc_policy = QcPolicy::SameRegression;
};

enum class CellSource { Empirical, PivotSystem, NonPivotRegression, MarRegression };

const char* to_string(CellSource source);

/// One per-combination value before aggregation. `anchor` is the pivot whose
/// regression produced it; `extra` holds the H set of non-pivot covariances.
struct RawValue {
  IndexList pivots;
  Index anchor = -1;
  IndexList extra;
  double value = 0.0;
};

struct AggregatedEstimate {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::vector<RawValue> raw;
  std::vector<std::string> failures;

  bool ok() const { return !raw.empty(); }
};

double median(std::vector<double> values);

/// Sorted r-subsets of the sorted candidates; a seeded uniform sample of
/// `max_combos` of them when there are more.
std::vector<IndexList> pivot_combinations(IndexList candidates, Index r, Index max_combos,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Closed forms on coefficient records. These take plain numbers so that the
// population oracles can be fed straight in.

/// (alpha_j - c0 - sum_{j'} c_{j'} alpha_{j'}) / c_m for the relation of
/// Y_j on (Y_m, Y_{J \ j}). Reads alpha at the response and the non-m regressors.
double mean_from_relation(const CoefficientRecord& rel, Index m, const Vector& alpha,
                          double denom_threshold = 0.0);

struct PivotSystem {
  Matrix m_hat;
  Vector p_hat;
  Index pivot_j = -1;
  IndexList pivots;
  double condition_number = 0.0;
};

/// `relations[t]` is the relation of Y_{pivots[t]} on (Y_m, Y_{J \ pivots[t]}).
/// `sigma` supplies the pivot block, `alpha` the pivot means and alpha(m).
PivotSystem build_pivot_system(Index m, const IndexList& pivots, Index j,
                               const std::vector<CoefficientRecord>& relations, double qc,
                               const Matrix& sigma, const Vector& alpha);

/// Solves the system; returns (Var(Y_m), Cov(Y_m, Y_{pivots[0]}), ...).
Vector solve_pivot_system(const PivotSystem& system, double cond_threshold = kConditionThreshold);

/// Covariance of Y_m and Y_ell from the relation of Y_j on (Y_m, Y_ell, Y_H).
/// Reads Var(Y_j), Var(Y_k) and Cov(Y_k, Y_k') for k, k' in {m, ell} u H
/// except the (m, ell) pair.
double nonpivot_cov_from_relation(const CoefficientRecord& rel, Index m, Index ell, double qc,
                                  const Matrix& sigma, double k_threshold = 0.0);

// ---------------------------------------------------------------------------
// Data-level estimators. Pivot candidates are `data.pivot_vars`.

struct MomentEstimates {
  Vector alpha_hat;
  Matrix sigma_hat;
  std::vector<CellSource> provenance;  // row-major p x p
  std::map<std::string, std::vector<RawValue>> per_pivot_details;
  std::vector<std::string> warnings;
  bool floored = false;

  CellSource source(Index i, Index j) const {
    return provenance[static_cast<std::size_t>(i * sigma_hat.cols() + j)];
  }
};

AggregatedEstimate estimate_mean_mnar(const Dataset& data, Index m, const EstimatorConfig& config);

struct VarCovEstimate {
  AggregatedEstimate variance;
  std::map<Index, AggregatedEstimate> cov;  // keyed by pivot candidate
  std::vector<std::string> warnings;
};

/// `alpha` must hold the pivot means and alpha(m); `sigma` the pivot block.
VarCovEstimate estimate_varcov_pivot(const Dataset& data, Index m, const Vector& alpha,
                                     const Matrix& sigma, const EstimatorConfig& config);

/// `prior` must already hold every pivot-system cell and empirical block.
AggregatedEstimate estimate_cov_nonpivot(const Dataset& data, Index m, Index ell,
                                         const MomentEstimates& prior,
                                         const EstimatorConfig& config);

MomentEstimates assemble_sigma(const Dataset& data, const EstimatorConfig& config);

/// MAR plug-ins for one missing variable over one pivot set.
struct MarEstimate {
  double alpha = 0.0;
  double variance = 0.0;
  std::map<Index, double> cov_pivot;
};

MarEstimate estimate_moments_mar(const Dataset& data, Index m, const IndexList& pivots,
                                 const Vector& alpha, const Matrix& sigma,
                                 const EstimatorConfig& config);

/// Every missing variable treated as MAR; aggregates over pivot combinations
/// by median like the MNAR path.
MomentEstimates assemble_sigma_mar(const Dataset& data, const EstimatorConfig& config);

struct ToyEstimates {
  double alpha1 = 0.0;
  double var1 = 0.0;
  double cov12 = 0.0;
  double cov13 = 0.0;
};

/// p = 3, r = 2, only column 0 missing.
ToyEstimates toy_graphical_estimates(const Dataset& data);

}  // namespace mnarppca
