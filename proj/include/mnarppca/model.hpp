#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mnarppca/types.hpp"

namespace mnarppca {

/// Generative PPCA parameters: Y = 1 alpha^T + W B + eps, W ~ N(0, I_r),
/// eps ~ N(0, sigma2 I_p). `loadings` is r x p (rows are latent factors).
struct PpcaParams {
  Vector alpha;
  Matrix loadings;
  double sigma2 = 0.0;

  Index rank() const { return loadings.rows(); }
  Index dim() const { return loadings.cols(); }

  /// Checks shapes, r < p and sigma2 >= 0. Full row rank is checked lazily
  /// by the operations that invert a submatrix.
  void validate() const;
};

/// Draws alpha ~ U[lo, hi]^p and loadings with i.i.d. N(0, 1) entries.
PpcaParams random_params(Index p, Index r, double sigma2, std::uint64_t alpha_seed,
                         std::uint64_t loading_seed, double alpha_lo = 0.0, double alpha_hi = 2.0);

Matrix sample_ppca(const PpcaParams& params, Index n, std::uint64_t seed);

/// B^T B + sigma2 I.
Matrix population_covariance(const PpcaParams& params);

enum class MechanismKind { SelfMaskedLogistic, SelfMaskedProbit, Mcar, GeneralMnar };

const char* to_string(MechanismKind kind);
MechanismKind mechanism_kind_from_string(const std::string& name);

/// Per-column missingness law. The probability of *observing* a cell is
/// F(phi0 + phi1 * s) where s is the cell's own value (self-masked) or the
/// weighted sum of the `depends_on` columns (general MNAR, logistic link).
/// Mcar observes each cell with probability `prob`.
struct MechanismSpec {
  MechanismKind kind = MechanismKind::Mcar;
  double phi0 = 0.0;
  double phi1 = 0.0;
  double prob = 1.0;
  IndexList depends_on;
  std::vector<double> weights;  // empty means all ones

  static MechanismSpec mcar(double prob);
  static MechanismSpec self_masked_logistic(double phi0, double phi1);
  static MechanismSpec self_masked_probit(double phi0, double phi1);
  static MechanismSpec general_mnar(double phi0, double phi1, IndexList depends_on);
};

/// Column index -> mechanism. Columns absent from the map are fully observed.
using MechanismMap = std::map<Index, MechanismSpec>;

/// Checks the general-MNAR constraint that the union of dependence sets leaves
/// at least `r` columns untouched (the pivot candidates).
void validate_mechanisms(const MechanismMap& specs, Index p, Index r);

Mask apply_mechanism(const Matrix& y, const MechanismMap& specs, std::uint64_t seed);

/// Observation probability F(eta) for the link used by `kind`.
double observation_probability(MechanismKind kind, double eta);

/// Solves for phi0 such that E[1 - F(phi0 + slope * S)] = missing_rate with
/// S ~ N(mean, sd^2). Bisection on a quadrature of the expected rate.
double calibrate_intercept(MechanismKind kind, double mean, double sd, double slope,
                           double missing_rate);

/// Expected missing rate under S ~ N(mean, sd^2); exposed for tests.
double expected_missing_rate(MechanismKind kind, double phi0, double slope, double mean,
                             double sd);

/// Observed data plus variable roles. Masked cells of `y` hold a quiet NaN and
/// must never be read; consult `omega` instead.
struct Dataset {
  Matrix y;
  Mask omega;
  IndexList mnar_vars;
  IndexList pivot_vars;  // pivot candidates, at least r of them
  std::vector<std::string> column_names;

  Index rows() const { return y.rows(); }
  Index cols() const { return y.cols(); }

  bool observed(Index i, Index j) const;
  /// Bounds-checked read of an observed cell; throws on a masked cell.
  double value(Index i, Index j) const;

  /// Builds a dataset from complete values and a mask, writing the sentinel
  /// into masked cells.
  static Dataset from_complete(const Matrix& complete, const Mask& omega, IndexList mnar_vars = {},
                               IndexList pivot_vars = {});

  /// Structural checks. With r > 0 also checks |pivots| >= r and |M| <= p - r.
  void validate(Index r = 0) const;
  IndexList non_mnar_vars() const;
  bool fully_observed_column(Index j) const;
};

inline double missing_sentinel() { return std::numeric_limits<double>::quiet_NaN(); }

/// Exact coefficients of the structural relation
///   Y_response = intercept + sum_k c_k Y_k + zeta
/// for the regressors spanning the latent space (|regressors| = r), obtained
/// from the inverse of the r x r loading submatrix.
struct CoefficientRecord {
  Index response = 0;
  IndexList regressors;
  double intercept = 0.0;
  Vector coefficients;

  double coefficient(Index col) const;
};

CoefficientRecord population_structural_coefficients(const PpcaParams& params, Index response,
                                                     const IndexList& regressors,
                                                     double cond_threshold = kConditionThreshold);

/// Coefficients of Y_j on (Y_m, Y_{J \ j}) in that order.
CoefficientRecord population_cc_coefficients(const PpcaParams& params, Index j, Index m,
                                             const IndexList& pivots,
                                             double cond_threshold = kConditionThreshold);

}  // namespace mnarppca
