#include "mnarppca/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <tuple>

#include "mnarppca/rng.hpp"

namespace mnarppca {

const char* to_string(QcPolicy policy) {
  switch (policy) {
    case QcPolicy::SameRegression: return "SameRegression";
    case QcPolicy::FullRows: return "FullRows";
  }
  return "Unknown";
}

QcPolicy qc_policy_from_string(const std::string& name) {
  if (name == "SameRegression") return QcPolicy::SameRegression;
  if (name == "FullRows") return QcPolicy::FullRows;
  throw Error(ErrorKind::InvalidArgument, "unknown Qc policy '" + name + "'");
}

const char* to_string(CellSource source) {
  switch (source) {
    case CellSource::Empirical: return "Empirical";
    case CellSource::PivotSystem: return "PivotSystem";
    case CellSource::NonPivotRegression: return "NonPivotRegression";
    case CellSource::MarRegression: return "MarRegression";
  }
  return "Unknown";
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "median of an empty set");
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

namespace {

std::string cell_label(const char* what, Index a, Index b = -1) {
  std::string s = std::string(what) + "[" + std::to_string(a);
  if (b >= 0) s += "," + std::to_string(b);
  return s + "]";
}

std::string list_str(const IndexList& cols) {
  std::string s = "{";
  for (std::size_t t = 0; t < cols.size(); ++t) {
    if (t) s += ",";
    s += std::to_string(cols[t]);
  }
  return s + "}";
}

IndexList without(const IndexList& set, Index drop) {
  IndexList out;
  for (Index c : set)
    if (c != drop) out.push_back(c);
  return out;
}

bool contains(const IndexList& set, Index c) {
  return std::find(set.begin(), set.end(), c) != set.end();
}

// All size-k subsets of `set`, lexicographic.
std::vector<IndexList> subsets(const IndexList& set, Index k) {
  std::vector<IndexList> out;
  const Index n = static_cast<Index>(set.size());
  if (k < 0 || k > n) return out;
  std::vector<Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    IndexList s;
    for (Index i : idx) s.push_back(set[static_cast<std::size_t>(i)]);
    out.push_back(s);
    Index pos = k - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == n - k + pos) --pos;
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
    for (Index t = pos + 1; t < k; ++t)
      idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
  }
  return out;
}

// Memoizes complete-case fits (and their failures) within one estimation pass.
class RegressionCache {
 public:
  RegressionCache(const Dataset& data, double cond) : data_(data), cond_(cond) {}

  const CcRegression& get(Index response, IndexList regressors, IndexList conditions) {
    std::sort(regressors.begin(), regressors.end());
    std::sort(conditions.begin(), conditions.end());
    auto key = std::make_tuple(response, regressors, conditions);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      Entry entry;
      try {
        entry.fit = cc_ols(data_, response, regressors, conditions, cond_);
      } catch (const Error& e) {
        entry.kind = e.kind();
        entry.message = e.what();
      }
      it = cache_.emplace(std::move(key), std::move(entry)).first;
    }
    if (!it->second.fit) throw Error(it->second.kind, it->second.message);
    return *it->second.fit;
  }

 private:
  struct Entry {
    std::optional<CcRegression> fit;
    ErrorKind kind = ErrorKind::InvalidArgument;
    std::string message;
  };
  const Dataset& data_;
  double cond_;
  std::map<std::tuple<Index, IndexList, IndexList>, Entry> cache_;
};

std::vector<double> raw_values(const AggregatedEstimate& est) {
  std::vector<double> v;
  v.reserve(est.raw.size());
  for (const auto& r : est.raw) v.push_back(r.value);
  return v;
}

void finalize(AggregatedEstimate& est, const std::string& what) {
  if (est.raw.empty()) {
    throw Error(ErrorKind::SingularSystem,
                "no pivot combination succeeded for " + what +
                    (est.failures.empty() ? std::string() : "; first failure: " + est.failures.front()));
  }
  est.value = median(raw_values(est));
}

// Rethrows with the failing kind preserved when nothing succeeded.
void finalize_keep_kind(AggregatedEstimate& est, const std::string& what,
                        std::optional<ErrorKind> first_kind) {
  if (est.raw.empty() && first_kind) {
    throw Error(*first_kind, "no pivot combination succeeded for " + what +
                                 (est.failures.empty() ? std::string()
                                                       : "; first failure: " + est.failures.front()));
  }
  finalize(est, what);
}

double pivot_qc(const Dataset& data, const CcRegression& fit, Index j, const IndexList& conditions,
                QcPolicy policy) {
  if (policy == QcPolicy::SameRegression) return fit.residual_variance;
  return cc_conditional_residual_variance(data, j, conditions);
}

struct Pass {
  const Dataset& data;
  const EstimatorConfig& config;
  RegressionCache cache;
  std::vector<IndexList> combos;

  Pass(const Dataset& d, const EstimatorConfig& c)
      : data(d), config(c), cache(d, c.cond_threshold) {
    combos = pivot_combinations(d.pivot_vars, c.rank, c.max_combos, c.seed);
  }

  AggregatedEstimate mean(Index m, const Vector& alpha, const Matrix& sigma) {
    AggregatedEstimate est;
    std::optional<ErrorKind> first;
    for (const auto& pivots : combos) {
      for (Index j : pivots) {
        try {
          const CcRegression& fit = cache.get(j, with_m(m, without(pivots, j)), {m});
          const double threshold = config.denom_rel * std::sqrt(std::max(sigma(j, j), 0.0));
          est.raw.push_back({pivots, j, {}, mean_from_relation(fit.record(), m, alpha, threshold)});
        } catch (const Error& e) {
          if (!first) first = e.kind();
          est.failures.push_back(list_str(pivots) + " anchor " + std::to_string(j) + ": " + e.what());
        }
      }
    }
    finalize_keep_kind(est, cell_label("alpha", m), first);
    return est;
  }

  VarCovEstimate varcov(Index m, const Vector& alpha, const Matrix& sigma) {
    VarCovEstimate out;
    std::optional<ErrorKind> first;
    for (Index c : data.pivot_vars) out.cov[c];
    for (const auto& pivots : combos) {
      std::vector<CoefficientRecord> relations;
      std::vector<const CcRegression*> fits;
      try {
        for (Index k : pivots) {
          const CcRegression& fit = cache.get(k, with_m(m, without(pivots, k)), {m});
          fits.push_back(&fit);
          relations.push_back(fit.record());
        }
      } catch (const Error& e) {
        if (!first) first = e.kind();
        out.variance.failures.push_back(list_str(pivots) + ": " + e.what());
        continue;
      }
      for (std::size_t t = 0; t < pivots.size(); ++t) {
        const Index j = pivots[t];
        try {
          const double qc = pivot_qc(data, *fits[t], j, {m}, config.qc_policy);
          const PivotSystem sys = build_pivot_system(m, pivots, j, relations, qc, sigma, alpha);
          const Vector x = solve_pivot_system(sys, config.cond_threshold);
          out.variance.raw.push_back({pivots, j, {}, x(0)});
          for (std::size_t u = 0; u < pivots.size(); ++u) {
            out.cov[pivots[u]].raw.push_back({pivots, j, {}, x(static_cast<Index>(u) + 1)});
          }
        } catch (const Error& e) {
          if (!first) first = e.kind();
          out.variance.failures.push_back(list_str(pivots) + " anchor " + std::to_string(j) +
                                          ": " + e.what());
        }
      }
    }
    finalize_keep_kind(out.variance, cell_label("var", m), first);
    if (out.variance.value < 0.0) {
      out.warnings.push_back("NonPsdWarning: negative variance estimate " +
                             std::to_string(out.variance.value) + " for column " +
                             std::to_string(m));
    }
    for (auto& [c, est] : out.cov) {
      est.failures = out.variance.failures;
      finalize_keep_kind(est, cell_label("cov", m, c), first);
    }
    return out;
  }

  AggregatedEstimate nonpivot(Index m, Index ell, const Matrix& sigma) {
    if (m == ell) throw Error(ErrorKind::InvalidArgument, "non-pivot covariance needs m != ell");
    const Index r = config.rank;
    if (r < 2) {
      throw Error(ErrorKind::NotImplemented,
                  "non-pivot covariance needs a latent dimension of at least 2");
    }
    AggregatedEstimate est;
    std::optional<ErrorKind> first;
    std::set<std::pair<Index, IndexList>> seen;
    for (const auto& pivots : combos) {
      for (Index j : pivots) {
        for (const IndexList& h : subsets(without(pivots, j), r - 2)) {
          if (!seen.insert({j, h}).second) continue;
          IndexList regs{m, ell};
          regs.insert(regs.end(), h.begin(), h.end());
          try {
            const CcRegression& fit = cache.get(j, regs, {m, ell});
            const double qc = pivot_qc(data, fit, j, {m, ell}, config.qc_policy);
            const double threshold = config.denom_rel * std::max(sigma(j, j), 0.0);
            est.raw.push_back(
                {pivots, j, h, nonpivot_cov_from_relation(fit.record(), m, ell, qc, sigma, threshold)});
          } catch (const Error& e) {
            if (!first) first = e.kind();
            est.failures.push_back("anchor " + std::to_string(j) + " H " + list_str(h) + ": " +
                                   e.what());
          }
        }
      }
    }
    finalize_keep_kind(est, cell_label("cov", m, ell), first);
    return est;
  }

  static IndexList with_m(Index m, IndexList rest) {
    rest.insert(rest.begin(), m);
    return rest;
  }
};

void require_rank(const Dataset& data, const EstimatorConfig& config) {
  if (config.rank < 1) throw Error(ErrorKind::InvalidArgument, "rank must be positive");
  data.validate(config.rank);
}

// Empirical alpha/sigma over the non-MNAR block plus provenance scaffolding.
MomentEstimates empirical_block(const Dataset& data) {
  const Index p = data.cols();
  MomentEstimates est;
  est.alpha_hat = Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
  est.sigma_hat = Matrix::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  est.provenance.assign(static_cast<std::size_t>(p * p), CellSource::Empirical);
  const IndexList non_mnar = data.non_mnar_vars();
  const ObservedMoments obs = observed_moments(data, non_mnar);
  for (std::size_t a = 0; a < non_mnar.size(); ++a) {
    est.alpha_hat(non_mnar[a]) = obs.mean(static_cast<Index>(a));
    for (std::size_t b = 0; b < non_mnar.size(); ++b)
      est.sigma_hat(non_mnar[a], non_mnar[b]) = obs.cov(static_cast<Index>(a), static_cast<Index>(b));
  }
  return est;
}

void set_cell(MomentEstimates& est, Index a, Index b, double v, CellSource src) {
  const Index p = est.sigma_hat.cols();
  est.sigma_hat(a, b) = v;
  est.sigma_hat(b, a) = v;
  est.provenance[static_cast<std::size_t>(a * p + b)] = src;
  est.provenance[static_cast<std::size_t>(b * p + a)] = src;
}

void floor_if_needed(MomentEstimates& est) {
  bool negative = false;
  for (Index i = 0; i < est.sigma_hat.rows(); ++i) negative = negative || est.sigma_hat(i, i) < 0.0;
  if (!negative) return;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(est.sigma_hat);
  Vector d = eig.eigenvalues().cwiseMax(0.0);
  Matrix rebuilt = eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
  est.sigma_hat = 0.5 * (rebuilt + rebuilt.transpose());
  est.floored = true;
  est.warnings.push_back("NonPsdWarning: covariance estimate had a negative diagonal entry; "
                         "negative eigenvalues floored at 0");
}

template <typename Fn>
auto with_cell(const std::string& label, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "cell " + label + ": " + e.what());
  }
}

}  // namespace

std::vector<IndexList> pivot_combinations(IndexList candidates, Index r, Index max_combos,
                                          std::uint64_t seed) {
  std::sort(candidates.begin(), candidates.end());
  const Index c = static_cast<Index>(candidates.size());
  if (r < 1 || r > c) {
    throw Error(ErrorKind::InvalidArgument, "need at least r = " + std::to_string(r) +
                                                " pivot candidates, have " + std::to_string(c));
  }
  if (max_combos < 1) throw Error(ErrorKind::InvalidArgument, "max_combos must be positive");
  // Count C(c, r), stopping once past the budget.
  double count = 1.0;
  for (Index t = 0; t < r; ++t) count = count * static_cast<double>(c - t) / static_cast<double>(t + 1);
  if (count <= static_cast<double>(max_combos) + 0.5) return subsets(candidates, r);

  Rng rng(seed);
  std::set<IndexList> chosen;
  IndexList pool = candidates;
  while (static_cast<Index>(chosen.size()) < max_combos) {
    for (Index t = 0; t < r; ++t) {
      std::uniform_int_distribution<Index> pick(t, c - 1);
      std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    IndexList s(pool.begin(), pool.begin() + r);
    std::sort(s.begin(), s.end());
    chosen.insert(std::move(s));
  }
  return {chosen.begin(), chosen.end()};
}

double mean_from_relation(const CoefficientRecord& rel, Index m, const Vector& alpha,
                          double denom_threshold) {
  const double cm = rel.coefficient(m);
  if (!(std::abs(cm) > denom_threshold) || cm == 0.0) {
    throw Error(ErrorKind::DenominatorNearZero,
                "coefficient of " + std::to_string(m) + " in the relation for " +
                    std::to_string(rel.response) + " is " + std::to_string(cm));
  }
  double acc = alpha(rel.response) - rel.intercept;
  for (std::size_t t = 0; t < rel.regressors.size(); ++t) {
    if (rel.regressors[t] == m) continue;
    acc -= rel.coefficients(static_cast<Index>(t)) * alpha(rel.regressors[t]);
  }
  return acc / cm;
}

PivotSystem build_pivot_system(Index m, const IndexList& pivots, Index j,
                               const std::vector<CoefficientRecord>& relations, double qc,
                               const Matrix& sigma, const Vector& alpha) {
  const Index r = static_cast<Index>(pivots.size());
  if (static_cast<Index>(relations.size()) != r) {
    throw Error(ErrorKind::InvalidArgument, "one relation per pivot is required");
  }
  auto pos = [&](Index col) {
    for (Index t = 0; t < r; ++t)
      if (pivots[static_cast<std::size_t>(t)] == col) return t;
    throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(col) + " is not a pivot");
  };
  const Index tj = pos(j);

  PivotSystem sys;
  sys.pivot_j = j;
  sys.pivots = pivots;
  sys.m_hat = Matrix::Zero(r + 1, r + 1);
  sys.p_hat = Vector::Zero(r + 1);

  // Variance row: law of total variance on the anchor's relation.
  const CoefficientRecord& rj = relations[static_cast<std::size_t>(tj)];
  const double bm = rj.coefficient(m);
  sys.m_hat(0, 0) = bm * bm;
  double quad = 0.0;
  for (Index a : pivots) {
    if (a == j) continue;
    const double ba = rj.coefficient(a);
    sys.m_hat(0, 1 + pos(a)) = 2.0 * bm * ba;
    for (Index b : pivots) {
      if (b == j) continue;
      quad += ba * sigma(a, b) * rj.coefficient(b);
    }
  }
  sys.p_hat(0) = sigma(j, j) - qc - quad;

  // Covariance rows, one per pivot relation.
  const double am = alpha(m);
  for (Index t = 0; t < r; ++t) {
    const Index k = pivots[static_cast<std::size_t>(t)];
    const CoefficientRecord& rk = relations[static_cast<std::size_t>(t)];
    if (rk.response != k) {
      throw Error(ErrorKind::InvalidArgument, "relation order must follow the pivot order");
    }
    sys.m_hat(1 + t, 0) = -rk.coefficient(m);
    sys.m_hat(1 + t, 1 + t) = 1.0;
    double fitted = rk.intercept + rk.coefficient(m) * am;
    for (Index l : pivots) {
      if (l == k) continue;
      const double bl = rk.coefficient(l);
      sys.m_hat(1 + t, 1 + pos(l)) = -bl;
      fitted += bl * alpha(l);
    }
    sys.p_hat(1 + t) = (fitted - alpha(k)) * am;
  }

  Eigen::JacobiSVD<Matrix> svd(sys.m_hat);
  const Vector& sv = svd.singularValues();
  sys.condition_number =
      sv(r) > 0.0 ? sv(0) / sv(r) : std::numeric_limits<double>::infinity();
  return sys;
}

Vector solve_pivot_system(const PivotSystem& system, double cond_threshold) {
  if (!(system.condition_number <= cond_threshold)) {
    throw Error(ErrorKind::SingularSystem,
                "pivot system for anchor " + std::to_string(system.pivot_j) +
                    " has condition number " + std::to_string(system.condition_number));
  }
  return system.m_hat.fullPivLu().solve(system.p_hat);
}

double nonpivot_cov_from_relation(const CoefficientRecord& rel, Index m, Index ell, double qc,
                                  const Matrix& sigma, double k_threshold) {
  if (m == ell) throw Error(ErrorKind::InvalidArgument, "non-pivot covariance needs m != ell");
  const double bm = rel.coefficient(m);
  const double bl = rel.coefficient(ell);
  const double k = 2.0 * bm * bl;
  if (!(std::abs(k) > k_threshold) || k == 0.0) {
    throw Error(ErrorKind::KNearZero, "K for (" + std::to_string(m) + ", " + std::to_string(ell) +
                                          ") via " + std::to_string(rel.response) + " is " +
                                          std::to_string(k));
  }
  const Index j = rel.response;
  double num = sigma(j, j) - qc;
  const auto& regs = rel.regressors;
  for (std::size_t a = 0; a < regs.size(); ++a) {
    const double ba = rel.coefficients(static_cast<Index>(a));
    num -= ba * ba * sigma(regs[a], regs[a]);
    for (std::size_t b = a + 1; b < regs.size(); ++b) {
      const bool target = (regs[a] == m && regs[b] == ell) || (regs[a] == ell && regs[b] == m);
      if (target) continue;
      num -= 2.0 * ba * rel.coefficients(static_cast<Index>(b)) * sigma(regs[a], regs[b]);
    }
  }
  return num / k;
}

AggregatedEstimate estimate_mean_mnar(const Dataset& data, Index m, const EstimatorConfig& config) {
  require_rank(data, config);
  if (!contains(data.mnar_vars, m)) {
    throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(m) + " is not MNAR");
  }
  const MomentEstimates base = empirical_block(data);
  Pass pass(data, config);
  return pass.mean(m, base.alpha_hat, base.sigma_hat);
}

VarCovEstimate estimate_varcov_pivot(const Dataset& data, Index m, const Vector& alpha,
                                     const Matrix& sigma, const EstimatorConfig& config) {
  require_rank(data, config);
  Pass pass(data, config);
  return pass.varcov(m, alpha, sigma);
}

AggregatedEstimate estimate_cov_nonpivot(const Dataset& data, Index m, Index ell,
                                         const MomentEstimates& prior,
                                         const EstimatorConfig& config) {
  require_rank(data, config);
  if (contains(data.pivot_vars, ell)) {
    throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(ell) + " is a pivot");
  }
  Pass pass(data, config);
  return pass.nonpivot(m, ell, prior.sigma_hat);
}

MomentEstimates assemble_sigma(const Dataset& data, const EstimatorConfig& config) {
  require_rank(data, config);
  MomentEstimates est = empirical_block(data);
  Pass pass(data, config);

  for (Index m : data.mnar_vars) {
    const std::string label = cell_label("alpha", m);
    AggregatedEstimate a =
        with_cell(label, [&] { return pass.mean(m, est.alpha_hat, est.sigma_hat); });
    est.alpha_hat(m) = a.value;
    est.per_pivot_details[label] = std::move(a.raw);
  }
  for (Index m : data.mnar_vars) {
    VarCovEstimate vc = with_cell(cell_label("var", m),
                                  [&] { return pass.varcov(m, est.alpha_hat, est.sigma_hat); });
    set_cell(est, m, m, vc.variance.value, CellSource::PivotSystem);
    est.per_pivot_details[cell_label("var", m)] = std::move(vc.variance.raw);
    for (auto& [c, cov] : vc.cov) {
      set_cell(est, m, c, cov.value, CellSource::PivotSystem);
      est.per_pivot_details[cell_label("cov", m, c)] = std::move(cov.raw);
    }
    est.warnings.insert(est.warnings.end(), vc.warnings.begin(), vc.warnings.end());
  }
  for (Index m : data.mnar_vars) {
    for (Index ell = 0; ell < data.cols(); ++ell) {
      if (ell == m || contains(data.pivot_vars, ell)) continue;
      if (contains(data.mnar_vars, ell) && ell < m) continue;
      const std::string label = cell_label("cov", m, ell);
      AggregatedEstimate c = with_cell(label, [&] { return pass.nonpivot(m, ell, est.sigma_hat); });
      set_cell(est, m, ell, c.value, CellSource::NonPivotRegression);
      est.per_pivot_details[label] = std::move(c.raw);
    }
  }
  floor_if_needed(est);
  return est;
}

// ---------------------------------------------------------------------------
// MAR adaptation

MarEstimate estimate_moments_mar(const Dataset& data, Index m, const IndexList& pivots,
                                 const Vector& alpha, const Matrix& sigma,
                                 const EstimatorConfig& config) {
  const CcRegression fit = cc_ols(data, m, pivots, {m}, config.cond_threshold);
  MarEstimate out;
  out.alpha = fit.intercept;
  for (std::size_t t = 0; t < pivots.size(); ++t)
    out.alpha += fit.coefficients(static_cast<Index>(t)) * alpha(pivots[t]);

  const double q = config.qc_policy == QcPolicy::SameRegression
                       ? fit.residual_variance
                       : cc_conditional_residual_variance(data, m, {m});
  double var = q;
  for (std::size_t a = 0; a < pivots.size(); ++a) {
    const double ba = fit.coefficients(static_cast<Index>(a));
    var += ba * ba * sigma(pivots[a], pivots[a]);
    for (std::size_t b = a + 1; b < pivots.size(); ++b)
      var += 2.0 * ba * fit.coefficients(static_cast<Index>(b)) * sigma(pivots[a], pivots[b]);
  }
  out.variance = var;

  for (Index l : pivots) {
    double c = fit.intercept * alpha(l) + fit.coefficient(l) * (sigma(l, l) + alpha(l) * alpha(l));
    for (Index k : pivots) {
      if (k == l) continue;
      c += fit.coefficient(k) * (sigma(l, k) + alpha(l) * alpha(k));
    }
    out.cov_pivot[l] = c - out.alpha * alpha(l);
  }
  return out;
}

MomentEstimates assemble_sigma_mar(const Dataset& data, const EstimatorConfig& config) {
  require_rank(data, config);
  MomentEstimates est = empirical_block(data);
  const auto combos = pivot_combinations(data.pivot_vars, config.rank, config.max_combos, config.seed);
  const Index p = data.cols();

  for (Index m : data.mnar_vars) {
    std::vector<MarEstimate> parts;
    std::vector<IndexList> used;
    std::string first_failure;
    std::optional<ErrorKind> first_kind;
    for (const auto& pivots : combos) {
      try {
        parts.push_back(estimate_moments_mar(data, m, pivots, est.alpha_hat, est.sigma_hat, config));
        used.push_back(pivots);
      } catch (const Error& e) {
        if (!first_kind) {
          first_kind = e.kind();
          first_failure = e.what();
        }
      }
    }
    if (parts.empty()) {
      throw Error(first_kind.value_or(ErrorKind::InvalidArgument),
                  "cell " + cell_label("alpha", m) + ": " + first_failure);
    }
    std::vector<double> a, v;
    for (std::size_t t = 0; t < parts.size(); ++t) {
      a.push_back(parts[t].alpha);
      v.push_back(parts[t].variance);
    }
    est.alpha_hat(m) = median(a);
    set_cell(est, m, m, median(v), CellSource::MarRegression);
    // Pivot covariances come from the combos that contain the pivot.
    for (Index c : data.pivot_vars) {
      std::vector<double> cv;
      for (const auto& part : parts) {
        auto it = part.cov_pivot.find(c);
        if (it != part.cov_pivot.end()) cv.push_back(it->second);
      }
      if (cv.empty()) {
        throw Error(ErrorKind::SingularSystem, "cell " + cell_label("cov", m, c) +
                                                   ": no pivot combination contains the pivot");
      }
      set_cell(est, m, c, median(cv), CellSource::MarRegression);
    }
  }

  // Non-pivot covariances: regress Y_m on (Y_ell, Y_H), |H| = r - 1.
  RegressionCache cache(data, config.cond_threshold);
  for (Index m : data.mnar_vars) {
    for (Index ell = 0; ell < p; ++ell) {
      if (ell == m || contains(data.pivot_vars, ell)) continue;
      const bool both = contains(data.mnar_vars, ell);
      if (both && ell < m) continue;
      std::vector<double> values;
      std::string first_failure;
      std::optional<ErrorKind> first_kind;
      std::set<std::pair<Index, IndexList>> seen;
      const std::vector<std::pair<Index, Index>> orientations =
          both ? std::vector<std::pair<Index, Index>>{{m, ell}, {ell, m}}
               : std::vector<std::pair<Index, Index>>{{m, ell}};
      for (const auto& [resp, other] : orientations) {
        for (const auto& pivots : combos) {
          for (const IndexList& h : subsets(pivots, config.rank - 1)) {
            if (!seen.insert({resp, h}).second) continue;
            IndexList regs{other};
            regs.insert(regs.end(), h.begin(), h.end());
            try {
              const CcRegression& fit = cache.get(resp, regs, {m, ell});
              const double ao = est.alpha_hat(other);
              double c = fit.intercept * ao +
                         fit.coefficient(other) * (est.sigma_hat(other, other) + ao * ao);
              for (Index k : h)
                c += fit.coefficient(k) * (est.sigma_hat(other, k) + ao * est.alpha_hat(k));
              values.push_back(c - est.alpha_hat(resp) * ao);
            } catch (const Error& e) {
              if (!first_kind) {
                first_kind = e.kind();
                first_failure = e.what();
              }
            }
          }
        }
      }
      if (values.empty()) {
        throw Error(first_kind.value_or(ErrorKind::InvalidArgument),
                    "cell " + cell_label("cov", m, ell) + ": " + first_failure);
      }
      set_cell(est, m, ell, median(values), CellSource::MarRegression);
    }
  }
  floor_if_needed(est);
  return est;
}

// ---------------------------------------------------------------------------

ToyEstimates toy_graphical_estimates(const Dataset& data) {
  if (data.cols() != 3) throw Error(ErrorKind::InvalidArgument, "toy estimator needs p = 3");
  if (data.mnar_vars != IndexList{0}) {
    throw Error(ErrorKind::InvalidArgument, "toy estimator needs column 0 as the only MNAR column");
  }
  if (!data.fully_observed_column(1) || !data.fully_observed_column(2)) {
    throw Error(ErrorKind::InvalidArgument, "toy estimator needs columns 1 and 2 fully observed");
  }
  const ObservedMoments obs = observed_moments(data, {1, 2});
  const double a2 = obs.mean(0), a3 = obs.mean(1);
  const double v2 = obs.cov(0, 0), v3 = obs.cov(1, 1), c23 = obs.cov(0, 1);

  const CcRegression y2 = cc_ols(data, 1, {0, 2}, {0});
  const CcRegression y3 = cc_ols(data, 2, {0, 1}, {0});
  const CcRegression y3_on_1 = cc_ols(data, 2, {0}, {0});
  const double b0 = y2.intercept, b1 = y2.coefficient(0), b3 = y2.coefficient(2);
  const double g1 = y3.coefficient(0), g2 = y3.coefficient(1);
  const double beta31 = y3_on_1.coefficient(0);
  if (b1 == 0.0 || g1 == 0.0 || beta31 == 0.0 || v3 == 0.0 || v2 == 0.0) {
    throw Error(ErrorKind::DenominatorNearZero, "toy estimator hit a zero denominator");
  }

  ToyEstimates out;
  double acc = a2 - b0;
  acc -= b3 * a3;
  out.alpha1 = acc / b1;
  const double beta13 = (c23 / v3 - b3) / b1;
  out.var1 = v3 / beta31 * beta13;
  out.cov12 = (c23 / v2 - g2) / g1 * v2;
  out.cov13 = beta13 * v3;
  return out;
}

}  // namespace mnarppca
