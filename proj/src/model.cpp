#include "mnarppca/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mnarppca/rng.hpp"

namespace mnarppca {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::SingularSubmatrix: return "SingularSubmatrix";
    case ErrorKind::InsufficientRows: return "InsufficientRows";
    case ErrorKind::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorKind::TooFewObservations: return "TooFewObservations";
    case ErrorKind::DenominatorNearZero: return "DenominatorNearZero";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::KNearZero: return "KNearZero";
    case ErrorKind::SingularConditioningBlock: return "SingularConditioningBlock";
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::ZeroMatrix: return "ZeroMatrix";
    case ErrorKind::NoMissingCells: return "NoMissingCells";
    case ErrorKind::EmptyColumn: return "EmptyColumn";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NotImplemented: return "NotImplemented";
  }
  return "Unknown";
}

void PpcaParams::validate() const {
  if (loadings.rows() < 1 || loadings.cols() < 1) {
    throw Error(ErrorKind::InvalidArgument, "loading matrix must be non-empty");
  }
  if (alpha.size() != loadings.cols()) {
    throw Error(ErrorKind::InvalidArgument, "alpha length must equal the number of variables");
  }
  if (rank() >= dim()) {
    throw Error(ErrorKind::InvalidArgument, "latent dimension must be smaller than p");
  }
  if (!(sigma2 >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "sigma2 must be nonnegative");
  }
}

PpcaParams random_params(Index p, Index r, double sigma2, std::uint64_t alpha_seed,
                         std::uint64_t loading_seed, double alpha_lo, double alpha_hi) {
  PpcaParams params;
  params.alpha.resize(p);
  params.loadings.resize(r, p);
  params.sigma2 = sigma2;
  Rng alpha_rng(alpha_seed);
  std::uniform_real_distribution<double> unif(alpha_lo, alpha_hi);
  for (Index j = 0; j < p; ++j) params.alpha(j) = unif(alpha_rng);
  Rng loading_rng(loading_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index k = 0; k < r; ++k)
    for (Index j = 0; j < p; ++j) params.loadings(k, j) = normal(loading_rng);
  params.validate();
  return params;
}

Matrix sample_ppca(const PpcaParams& params, Index n, std::uint64_t seed) {
  params.validate();
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be at least 1");
  const Index r = params.rank();
  const Index p = params.dim();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix latent(n, r);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < r; ++k) latent(i, k) = normal(rng);
  Matrix y = latent * params.loadings;
  const double sigma = std::sqrt(params.sigma2);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double noise = normal(rng);
      y(i, j) += params.alpha(j) + sigma * noise;
    }
  }
  return y;
}

Matrix population_covariance(const PpcaParams& params) {
  params.validate();
  Matrix sigma = params.loadings.transpose() * params.loadings;
  sigma.diagonal().array() += params.sigma2;
  return sigma;
}

// ---------------------------------------------------------------------------
// Mechanisms

const char* to_string(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::SelfMaskedLogistic: return "SelfMaskedLogistic";
    case MechanismKind::SelfMaskedProbit: return "SelfMaskedProbit";
    case MechanismKind::Mcar: return "Mcar";
    case MechanismKind::GeneralMnar: return "GeneralMnar";
  }
  return "Unknown";
}

MechanismKind mechanism_kind_from_string(const std::string& name) {
  for (auto kind : {MechanismKind::SelfMaskedLogistic, MechanismKind::SelfMaskedProbit,
                    MechanismKind::Mcar, MechanismKind::GeneralMnar}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown mechanism kind '" + name + "'");
}

MechanismSpec MechanismSpec::mcar(double prob) {
  MechanismSpec spec;
  spec.kind = MechanismKind::Mcar;
  spec.prob = prob;
  return spec;
}

MechanismSpec MechanismSpec::self_masked_logistic(double phi0, double phi1) {
  MechanismSpec spec;
  spec.kind = MechanismKind::SelfMaskedLogistic;
  spec.phi0 = phi0;
  spec.phi1 = phi1;
  return spec;
}

MechanismSpec MechanismSpec::self_masked_probit(double phi0, double phi1) {
  MechanismSpec spec = self_masked_logistic(phi0, phi1);
  spec.kind = MechanismKind::SelfMaskedProbit;
  return spec;
}

MechanismSpec MechanismSpec::general_mnar(double phi0, double phi1, IndexList depends_on) {
  MechanismSpec spec = self_masked_logistic(phi0, phi1);
  spec.kind = MechanismKind::GeneralMnar;
  spec.depends_on = std::move(depends_on);
  return spec;
}

double observation_probability(MechanismKind kind, double eta) {
  switch (kind) {
    case MechanismKind::SelfMaskedProbit:
      return 0.5 * std::erfc(-eta / std::sqrt(2.0));
    case MechanismKind::SelfMaskedLogistic:
    case MechanismKind::GeneralMnar:
      return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case MechanismKind::Mcar:
      break;
  }
  throw Error(ErrorKind::InvalidArgument, "Mcar has no link function");
}

void validate_mechanisms(const MechanismMap& specs, Index p, Index r) {
  std::set<Index> touched;
  for (const auto& [col, spec] : specs) {
    if (col < 0 || col >= p) {
      throw Error(ErrorKind::OutOfRange, "mechanism column " + std::to_string(col) + " out of range");
    }
    if (spec.kind == MechanismKind::Mcar && !(spec.prob >= 0.0 && spec.prob <= 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "Mcar probability must lie in [0, 1]");
    }
    if (spec.kind == MechanismKind::GeneralMnar) {
      if (spec.depends_on.empty()) {
        throw Error(ErrorKind::InvalidArgument, "GeneralMnar needs a dependence set");
      }
      if (!spec.weights.empty() && spec.weights.size() != spec.depends_on.size()) {
        throw Error(ErrorKind::InvalidArgument, "GeneralMnar weights do not match dependence set");
      }
      for (Index d : spec.depends_on) {
        if (d < 0 || d >= p) {
          throw Error(ErrorKind::OutOfRange,
                      "GeneralMnar dependence column " + std::to_string(d) + " out of range");
        }
        touched.insert(d);
      }
    }
  }
  if (r > 0 && static_cast<Index>(touched.size()) > p - r) {
    throw Error(ErrorKind::InvalidArgument,
                "general MNAR dependence sets must leave at least r columns untouched");
  }
}

Mask apply_mechanism(const Matrix& y, const MechanismMap& specs, std::uint64_t seed) {
  const Index n = y.rows();
  const Index p = y.cols();
  validate_mechanisms(specs, p, 0);
  Mask omega = Mask::Ones(n, p);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Cells are drawn row-major over the specified columns so the stream does
  // not depend on map iteration details beyond column order.
  for (Index i = 0; i < n; ++i) {
    for (const auto& [col, spec] : specs) {
      double prob = 0.0;
      switch (spec.kind) {
        case MechanismKind::Mcar:
          prob = spec.prob;
          break;
        case MechanismKind::SelfMaskedLogistic:
        case MechanismKind::SelfMaskedProbit:
          prob = observation_probability(spec.kind, spec.phi0 + spec.phi1 * y(i, col));
          break;
        case MechanismKind::GeneralMnar: {
          double s = 0.0;
          for (std::size_t t = 0; t < spec.depends_on.size(); ++t) {
            const double w = spec.weights.empty() ? 1.0 : spec.weights[t];
            s += w * y(i, spec.depends_on[t]);
          }
          prob = observation_probability(spec.kind, spec.phi0 + spec.phi1 * s);
          break;
        }
      }
      omega(i, col) = unif(rng) < prob ? 1 : 0;
    }
  }
  return omega;
}

double expected_missing_rate(MechanismKind kind, double phi0, double slope, double mean,
                             double sd) {
  if (kind == MechanismKind::Mcar) {
    throw Error(ErrorKind::InvalidArgument, "expected_missing_rate needs a link-based mechanism");
  }
  // Composite Simpson over z in [-10, 10] for E[F(phi0 + slope (mean + sd z))].
  constexpr int kIntervals = 2000;
  constexpr double kLo = -10.0;
  constexpr double kHi = 10.0;
  const double h = (kHi - kLo) / kIntervals;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
  double acc = 0.0;
  for (int t = 0; t <= kIntervals; ++t) {
    const double z = kLo + t * h;
    const double weight = (t == 0 || t == kIntervals) ? 1.0 : (t % 2 == 1 ? 4.0 : 2.0);
    const double density = inv_sqrt_2pi * std::exp(-0.5 * z * z);
    acc += weight * density * observation_probability(kind, phi0 + slope * (mean + sd * z));
  }
  return 1.0 - acc * h / 3.0;
}

double calibrate_intercept(MechanismKind kind, double mean, double sd, double slope,
                           double missing_rate) {
  if (!(missing_rate > 0.0 && missing_rate < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "target missing rate must lie in (0, 1)");
  }
  if (!(sd >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sd must be nonnegative");
  // The missing rate decreases in phi0.
  double lo = -1e3;
  double hi = 1e3;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (expected_missing_rate(kind, mid, slope, mean, sd) > missing_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Dataset

bool Dataset::observed(Index i, Index j) const {
  if (i < 0 || i >= rows() || j < 0 || j >= cols()) {
    throw Error(ErrorKind::OutOfRange, "cell (" + std::to_string(i) + ", " + std::to_string(j) +
                                           ") outside " + std::to_string(rows()) + "x" +
                                           std::to_string(cols()));
  }
  return omega(i, j) != 0;
}

double Dataset::value(Index i, Index j) const {
  if (!observed(i, j)) {
    throw Error(ErrorKind::InvalidArgument, "read of masked cell (" + std::to_string(i) + ", " +
                                                std::to_string(j) + ")");
  }
  return y(i, j);
}

Dataset Dataset::from_complete(const Matrix& complete, const Mask& omega, IndexList mnar_vars,
                               IndexList pivot_vars) {
  if (complete.rows() != omega.rows() || complete.cols() != omega.cols()) {
    throw Error(ErrorKind::InvalidArgument, "data and mask shapes differ");
  }
  Dataset data;
  data.y = complete;
  data.omega = omega;
  for (Index i = 0; i < complete.rows(); ++i)
    for (Index j = 0; j < complete.cols(); ++j)
      if (omega(i, j) == 0) data.y(i, j) = missing_sentinel();
  data.mnar_vars = std::move(mnar_vars);
  data.pivot_vars = std::move(pivot_vars);
  std::sort(data.mnar_vars.begin(), data.mnar_vars.end());
  std::sort(data.pivot_vars.begin(), data.pivot_vars.end());
  data.validate();
  return data;
}

void Dataset::validate(Index r) const {
  const Index p = cols();
  if (omega.rows() != rows() || omega.cols() != p) {
    throw Error(ErrorKind::InvalidArgument, "mask shape does not match data");
  }
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != p) {
    throw Error(ErrorKind::InvalidArgument, "column name count does not match data");
  }
  auto check_set = [&](const IndexList& set, const char* label) {
    std::set<Index> seen;
    for (Index j : set) {
      if (j < 0 || j >= p) {
        throw Error(ErrorKind::OutOfRange,
                    std::string(label) + " index " + std::to_string(j) + " out of range");
      }
      if (!seen.insert(j).second) {
        throw Error(ErrorKind::InvalidArgument,
                    std::string(label) + " index " + std::to_string(j) + " repeated");
      }
    }
  };
  check_set(mnar_vars, "MNAR");
  check_set(pivot_vars, "pivot");
  for (Index j : pivot_vars) {
    if (std::find(mnar_vars.begin(), mnar_vars.end(), j) != mnar_vars.end()) {
      throw Error(ErrorKind::InvalidArgument,
                  "variable " + std::to_string(j) + " is both MNAR and pivot");
    }
  }
  if (r > 0) {
    if (static_cast<Index>(pivot_vars.size()) < r) {
      throw Error(ErrorKind::InvalidArgument, "need at least r pivot variables");
    }
    if (static_cast<Index>(mnar_vars.size()) > p - r) {
      throw Error(ErrorKind::InvalidArgument, "number of MNAR variables must not exceed p - r");
    }
  }
}

IndexList Dataset::non_mnar_vars() const {
  IndexList out;
  for (Index j = 0; j < cols(); ++j)
    if (std::find(mnar_vars.begin(), mnar_vars.end(), j) == mnar_vars.end()) out.push_back(j);
  return out;
}

bool Dataset::fully_observed_column(Index j) const {
  if (j < 0 || j >= cols()) throw Error(ErrorKind::OutOfRange, "column out of range");
  return (omega.col(j).array() != 0).all();
}

// ---------------------------------------------------------------------------
// Population coefficients

double CoefficientRecord::coefficient(Index col) const {
  for (std::size_t t = 0; t < regressors.size(); ++t)
    if (regressors[t] == col) return coefficients(static_cast<Index>(t));
  throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(col) + " is not a regressor");
}

CoefficientRecord population_structural_coefficients(const PpcaParams& params, Index response,
                                                     const IndexList& regressors,
                                                     double cond_threshold) {
  params.validate();
  const Index r = params.rank();
  const Index p = params.dim();
  if (static_cast<Index>(regressors.size()) != r) {
    throw Error(ErrorKind::InvalidArgument, "structural relation needs exactly r regressors");
  }
  if (response < 0 || response >= p) throw Error(ErrorKind::OutOfRange, "response out of range");
  Matrix reduced(r, r);
  for (Index t = 0; t < r; ++t) {
    const Index col = regressors[static_cast<std::size_t>(t)];
    if (col < 0 || col >= p || col == response) {
      throw Error(ErrorKind::InvalidArgument, "invalid regressor " + std::to_string(col));
    }
    reduced.col(t) = params.loadings.col(col);
  }
  Eigen::JacobiSVD<Matrix> svd(reduced);
  const auto& sv = svd.singularValues();
  const double cond = sv(r - 1) > 0 ? sv(0) / sv(r - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_threshold)) {
    std::ostringstream msg;
    msg << "loading submatrix for regressors of " << response << " has condition number " << cond;
    throw Error(ErrorKind::SingularSubmatrix, msg.str());
  }
  // Y_R = 1 alpha_R^T + W R + eps_R  =>  W = (Y_R - alpha_R - eps_R) R^{-1},
  // so Y_resp = alpha_resp + (Y_R - alpha_R) R^{-1} b_resp + noise.
  CoefficientRecord rec;
  rec.response = response;
  rec.regressors = regressors;
  rec.coefficients = reduced.partialPivLu().solve(params.loadings.col(response));
  double intercept = params.alpha(response);
  for (Index t = 0; t < r; ++t)
    intercept -= rec.coefficients(t) * params.alpha(regressors[static_cast<std::size_t>(t)]);
  rec.intercept = intercept;
  return rec;
}

CoefficientRecord population_cc_coefficients(const PpcaParams& params, Index j, Index m,
                                             const IndexList& pivots, double cond_threshold) {
  IndexList regressors{m};
  bool found = false;
  for (Index k : pivots) {
    if (k == j) {
      found = true;
    } else {
      regressors.push_back(k);
    }
  }
  if (!found) throw Error(ErrorKind::InvalidArgument, "pivot j must belong to the pivot set");
  return population_structural_coefficients(params, j, regressors, cond_threshold);
}

}  // namespace mnarppca
