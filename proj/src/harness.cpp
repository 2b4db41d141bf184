#include "mnarppca/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include <json.hpp>

#include "mnarppca/baselines.hpp"
#include "mnarppca/csv.hpp"
#include "mnarppca/metrics.hpp"
#include "mnarppca/ppca.hpp"
#include "mnarppca/rng.hpp"

namespace mnarppca {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_index_set(const IndexList& set, Index p, const std::string& what) {
  std::set<Index> seen;
  for (Index j : set) {
    if (j < 0 || j >= p) {
      throw Error(ErrorKind::OutOfRange, what + " index " + std::to_string(j) + " out of range");
    }
    if (!seen.insert(j).second) {
      throw Error(ErrorKind::InvalidArgument, what + " index " + std::to_string(j) + " repeated");
    }
  }
}

template <typename T>
void read_field(const json& doc, const char* key, T& target) {
  if (doc.contains(key)) target = doc.at(key).get<T>();
}

MechanismGroup parse_group(const json& g) {
  static const std::set<std::string> allowed{"kind",  "columns", "missing_rate", "slope",
                                             "phi0",  "phi1",    "extra_deps"};
  for (const auto& [key, _] : g.items()) {
    if (!allowed.count(key)) throw Error(ErrorKind::ParseError, "unknown mechanism field '" + key + "'");
  }
  MechanismGroup group;
  if (g.contains("kind")) group.kind = mechanism_kind_from_string(g.at("kind").get<std::string>());
  read_field(g, "columns", group.columns);
  read_field(g, "missing_rate", group.missing_rate);
  read_field(g, "slope", group.slope);
  read_field(g, "extra_deps", group.extra_deps);
  if (g.contains("phi0")) group.phi0 = g.at("phi0").get<double>();
  if (g.contains("phi1")) group.phi1 = g.at("phi1").get<double>();
  return group;
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"MNAR", "MAR", "Mean", "Del", "SoftMAR", "EMMAR",
                                              "MNARparam"};
  return names;
}

bool method_implemented(const std::string& method) {
  return method != "EMMAR" && method != "MNARparam";
}

void ExperimentConfig::validate() const {
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "n must be at least 2");
  if (r < 1 || r >= p) throw Error(ErrorKind::InvalidArgument, "need 1 <= r < p");
  if (assumed_rank() < 1 || assumed_rank() >= p) {
    throw Error(ErrorKind::InvalidArgument, "assumed rank must lie in [1, p)");
  }
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be nonnegative");
  if (replications < 1) throw Error(ErrorKind::InvalidArgument, "replications must be at least 1");
  if (max_combos < 1) throw Error(ErrorKind::InvalidArgument, "max_combos must be positive");
  if (threads < 1) throw Error(ErrorKind::InvalidArgument, "threads must be positive");
  check_index_set(mnar_vars, p, "MNAR");
  check_index_set(pivot_vars, p, "pivot");
  for (Index j : pivot_vars) {
    if (std::find(mnar_vars.begin(), mnar_vars.end(), j) != mnar_vars.end()) {
      throw Error(ErrorKind::InvalidArgument, "column " + std::to_string(j) + " is MNAR and pivot");
    }
  }
  std::set<Index> covered;
  for (const auto& g : mechanisms) {
    check_index_set(g.columns, p, "mechanism");
    for (Index c : g.columns) {
      if (!covered.insert(c).second) {
        throw Error(ErrorKind::InvalidArgument,
                    "column " + std::to_string(c) + " appears in two mechanism groups");
      }
    }
    if (g.kind != MechanismKind::Mcar && (g.phi0.has_value() != g.phi1.has_value())) {
      throw Error(ErrorKind::InvalidArgument, "phi0 and phi1 must be given together");
    }
    if (!(g.missing_rate >= 0.0 && g.missing_rate < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "missing_rate must lie in [0, 1)");
    }
    if (g.kind == MechanismKind::GeneralMnar &&
        (g.extra_deps < 0 || g.extra_deps >= static_cast<Index>(g.columns.size()))) {
      throw Error(ErrorKind::InvalidArgument, "extra_deps must be below the group size");
    }
  }
  for (const auto& m : methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
      throw Error(ErrorKind::InvalidArgument, "unknown method '" + m + "'");
    }
  }
  if (focus_var < 0 || focus_var >= p) throw Error(ErrorKind::OutOfRange, "focus_var out of range");
  if (mnar_partner >= p || pivot_partner >= p) {
    throw Error(ErrorKind::OutOfRange, "partner column out of range");
  }
  if (soft_grid < 1) throw Error(ErrorKind::InvalidArgument, "soft_grid must be positive");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
  static const std::set<std::string> allowed{
      "n", "p", "r", "r_assumed", "sigma", "alpha_lo", "alpha_hi", "alpha_seed", "loading_seed",
      "data_seed", "mechanism_seed", "mechanisms", "mnar_vars", "pivot_vars", "methods",
      "replications", "max_combos", "qc_policy", "estimate_noise", "focus_var", "mnar_partner",
      "pivot_partner", "soft_grid", "threads", "record_wall_time", "output_path"};
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.count(key)) throw Error(ErrorKind::ParseError, "unknown config field '" + key + "'");
  }
  ExperimentConfig cfg;
  try {
    read_field(doc, "n", cfg.n);
    read_field(doc, "p", cfg.p);
    read_field(doc, "r", cfg.r);
    read_field(doc, "r_assumed", cfg.r_assumed);
    read_field(doc, "sigma", cfg.sigma);
    read_field(doc, "alpha_lo", cfg.alpha_lo);
    read_field(doc, "alpha_hi", cfg.alpha_hi);
    read_field(doc, "alpha_seed", cfg.alpha_seed);
    read_field(doc, "loading_seed", cfg.loading_seed);
    read_field(doc, "data_seed", cfg.data_seed);
    read_field(doc, "mechanism_seed", cfg.mechanism_seed);
    read_field(doc, "mnar_vars", cfg.mnar_vars);
    read_field(doc, "pivot_vars", cfg.pivot_vars);
    read_field(doc, "methods", cfg.methods);
    read_field(doc, "replications", cfg.replications);
    read_field(doc, "max_combos", cfg.max_combos);
    read_field(doc, "estimate_noise", cfg.estimate_noise);
    read_field(doc, "focus_var", cfg.focus_var);
    read_field(doc, "mnar_partner", cfg.mnar_partner);
    read_field(doc, "pivot_partner", cfg.pivot_partner);
    read_field(doc, "soft_grid", cfg.soft_grid);
    read_field(doc, "threads", cfg.threads);
    read_field(doc, "record_wall_time", cfg.record_wall_time);
    read_field(doc, "output_path", cfg.output_path);
    if (doc.contains("qc_policy")) cfg.qc_policy = qc_policy_from_string(doc.at("qc_policy").get<std::string>());
    if (doc.contains("mechanisms")) {
      for (const auto& g : doc.at("mechanisms")) cfg.mechanisms.push_back(parse_group(g));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

PpcaParams experiment_params(const ExperimentConfig& config) {
  return random_params(config.p, config.r, config.sigma * config.sigma, config.alpha_seed,
                       config.loading_seed, config.alpha_lo, config.alpha_hi);
}

MechanismMap experiment_mechanisms(const ExperimentConfig& config, const PpcaParams& params) {
  const Matrix sigma = population_covariance(params);
  MechanismMap specs;
  // Dependence structure is drawn once per experiment, not per replicate.
  Rng structure(derive_seed(config.mechanism_seed, 0x5eedULL));
  for (const auto& g : config.mechanisms) {
    for (Index m : g.columns) {
      if (g.kind == MechanismKind::Mcar) {
        specs[m] = MechanismSpec::mcar(1.0 - g.missing_rate);
        continue;
      }
      IndexList deps{m};
      if (g.kind == MechanismKind::GeneralMnar) {
        IndexList pool;
        for (Index c : g.columns)
          if (c != m) pool.push_back(c);
        std::shuffle(pool.begin(), pool.end(), structure);
        deps.insert(deps.end(), pool.begin(), pool.begin() + g.extra_deps);
      }
      std::vector<double> weights;
      double mean = 0.0;
      for (Index d : deps) {
        const double w = 1.0 / std::sqrt(sigma(d, d));
        weights.push_back(w);
        mean += w * params.alpha(d);
      }
      double var = 0.0;
      for (std::size_t a = 0; a < deps.size(); ++a)
        for (std::size_t b = 0; b < deps.size(); ++b) var += weights[a] * weights[b] * sigma(deps[a], deps[b]);
      const double sd = std::sqrt(var);

      MechanismSpec spec;
      double phi0 = 0.0, phi1 = 0.0;
      // Self-masked laws read Y_m itself, general laws the weighted score.
      const double self_scale = g.kind == MechanismKind::GeneralMnar ? 1.0 : weights[0];
      if (g.phi0) {
        phi0 = *g.phi0;
        phi1 = *g.phi1 / self_scale;
      } else if (g.missing_rate > 0.0) {
        // Slope in standard-deviation units of the driving score.
        phi1 = g.slope / sd;
        const MechanismKind link =
            g.kind == MechanismKind::SelfMaskedProbit ? MechanismKind::SelfMaskedProbit
                                                      : MechanismKind::SelfMaskedLogistic;
        phi0 = calibrate_intercept(link, mean, sd, phi1, g.missing_rate);
      } else {
        specs[m] = MechanismSpec::mcar(1.0);
        continue;
      }
      if (g.kind == MechanismKind::GeneralMnar) {
        spec = MechanismSpec::general_mnar(phi0, phi1, deps);
        spec.weights = weights;
      } else if (g.kind == MechanismKind::SelfMaskedProbit) {
        spec = MechanismSpec::self_masked_probit(phi0, phi1 * self_scale);
      } else {
        spec = MechanismSpec::self_masked_logistic(phi0, phi1 * self_scale);
      }
      specs[m] = spec;
    }
  }
  validate_mechanisms(specs, config.p, config.r);
  return specs;
}

Replicate simulate_replicate(const ExperimentConfig& config, Index replicate) {
  config.validate();
  Replicate rep;
  rep.params = experiment_params(config);
  rep.mechanisms = experiment_mechanisms(config, rep.params);
  const auto stream = static_cast<std::uint64_t>(replicate);
  rep.complete = sample_ppca(rep.params, config.n, derive_seed(config.data_seed, stream));
  const Mask omega = apply_mechanism(rep.complete, rep.mechanisms, derive_seed(config.mechanism_seed, stream));
  rep.data = Dataset::from_complete(rep.complete, omega, config.mnar_vars, config.pivot_vars);
  rep.data.column_names = default_column_names(config.p);
  return rep;
}

namespace {

struct MethodOutput {
  Vector alpha;
  Matrix sigma;
  LoadingEstimate loadings;
  Matrix imputed;
};

double loading_noise(const ExperimentConfig& config, const Dataset& data) {
  if (!config.estimate_noise) return config.sigma * config.sigma;
  return estimate_noise(noise_reference_covariance(data, config.assumed_rank()), config.assumed_rank());
}

EstimatorConfig estimator_config(const ExperimentConfig& config, Index replicate) {
  EstimatorConfig est;
  est.rank = config.assumed_rank();
  est.max_combos = config.max_combos;
  est.seed = derive_seed(config.mechanism_seed ^ config.data_seed, static_cast<std::uint64_t>(replicate) + 0x1000);
  est.qc_policy = config.qc_policy;
  return est;
}

MethodOutput run_core(const ExperimentConfig& config, const Replicate& rep, const std::string& method,
                      Index replicate) {
  const Dataset& data = rep.data;
  const Index ra = config.assumed_rank();
  MethodOutput out;
  if (method == "MNAR" || method == "MAR") {
    const EstimatorConfig est = estimator_config(config, replicate);
    const double s2 = config.estimate_noise ? -1.0 : config.sigma * config.sigma;
    PipelineResult res = method == "MNAR" ? mnar_pipeline(data, est, s2) : mar_pipeline(data, est, s2);
    out.alpha = res.estimates.alpha_hat;
    out.sigma = res.estimates.sigma_hat;
    out.loadings = std::move(res.loadings);
    out.imputed = std::move(res.imputed);
    return out;
  }
  const double s2 = loading_noise(config, data);
  if (method == "Mean" || method == "SoftMAR") {
    out.imputed = method == "Mean" ? mean_impute(data)
                                   : soft_impute_oracle(data, rep.complete, config.soft_grid).completed;
    out.alpha = out.imputed.colwise().mean().transpose();
    out.sigma = sample_covariance(out.imputed);
    out.loadings = estimate_loadings(out.sigma, ra, s2);
    return out;
  }
  if (method == "Del") {
    const ListwiseStats stats = listwise_stats(data);
    out.alpha = stats.mean;
    out.sigma = stats.cov;
    out.loadings = estimate_loadings(out.sigma, ra, s2);
    out.imputed = impute(data, out.alpha, out.loadings);
    return out;
  }
  throw Error(ErrorKind::NotImplemented, "method '" + method + "' is an external baseline");
}

Index resolve_mnar_partner(const ExperimentConfig& config) {
  if (config.mnar_partner >= 0) return config.mnar_partner;
  for (Index m : config.mnar_vars)
    if (m != config.focus_var) return m;
  return -1;
}

Index resolve_pivot_partner(const ExperimentConfig& config) {
  if (config.pivot_partner >= 0) return config.pivot_partner;
  return config.pivot_vars.empty() ? -1 : config.pivot_vars.front();
}

}  // namespace

BenchmarkRow run_method(const ExperimentConfig& config, const Replicate& rep,
                        const std::string& method, Index replicate) {
  BenchmarkRow row;
  row.method = method;
  row.replicate = replicate;
  row.focus_var = config.focus_var;
  row.cov_mnar_partner = resolve_mnar_partner(config);
  row.cov_pivot_partner = resolve_pivot_partner(config);
  const Matrix truth = population_covariance(rep.params);
  const Index f = config.focus_var;
  row.alpha_true = rep.params.alpha(f);
  row.var_true = truth(f, f);
  row.cov_mnar_true = row.cov_mnar_partner >= 0 ? truth(f, row.cov_mnar_partner) : kNaN;
  row.cov_pivot_true = row.cov_pivot_partner >= 0 ? truth(f, row.cov_pivot_partner) : kNaN;
  row.alpha_hat = row.var_hat = row.cov_mnar_hat = row.cov_pivot_hat = kNaN;
  row.rv = row.pred_error = row.wall_time = kNaN;

  const auto start = std::chrono::steady_clock::now();
  try {
    const MethodOutput out = run_core(config, rep, method, replicate);
    row.alpha_hat = out.alpha(f);
    row.var_hat = out.sigma(f, f);
    if (row.cov_mnar_partner >= 0) row.cov_mnar_hat = out.sigma(f, row.cov_mnar_partner);
    if (row.cov_pivot_partner >= 0) row.cov_pivot_hat = out.sigma(f, row.cov_pivot_partner);
    row.rv = rv_coefficient(out.loadings.b_hat, rep.params.loadings);
    row.pred_error = prediction_error(out.imputed, rep.complete, rep.data.omega);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  if (config.record_wall_time) {
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return row;
}

std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& config) {
  config.validate();
  const Index reps = config.replications;
  std::vector<std::vector<BenchmarkRow>> per_rep(static_cast<std::size_t>(reps));
  std::atomic<Index> next{0};
  auto worker = [&] {
    for (Index rep = next++; rep < reps; rep = next++) {
      auto& rows = per_rep[static_cast<std::size_t>(rep)];
      try {
        const Replicate data = simulate_replicate(config, rep);
        for (const auto& method : config.methods) rows.push_back(run_method(config, data, method, rep));
      } catch (const std::exception& e) {
        for (const auto& method : config.methods) {
          BenchmarkRow row;
          row.method = method;
          row.replicate = rep;
          row.focus_var = config.focus_var;
          row.alpha_hat = row.alpha_true = row.var_hat = row.var_true = kNaN;
          row.cov_mnar_hat = row.cov_mnar_true = row.cov_pivot_hat = row.cov_pivot_true = kNaN;
          row.rv = row.pred_error = row.wall_time = kNaN;
          row.error = std::string("simulation failed: ") + e.what();
          rows.push_back(row);
        }
      }
    }
  };
  const Index nthreads = std::min(config.threads, reps);
  std::vector<std::thread> pool;
  for (Index t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<BenchmarkRow> rows;
  for (auto& part : per_rep)
    for (auto& row : part) rows.push_back(std::move(row));
  std::stable_sort(rows.begin(), rows.end(), [](const BenchmarkRow& a, const BenchmarkRow& b) {
    return std::tie(a.method, a.replicate) < std::tie(b.method, b.replicate);
  });
  return rows;
}

namespace {

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::string index_or_na(Index v) { return v >= 0 ? std::to_string(v) : std::string(kNaToken); }

}  // namespace

std::string format_results_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out =
      "schema_version,method,replicate,focus_var,alpha_hat,alpha_true,var_hat,var_true,"
      "cov_mnar_partner,cov_mnar_hat,cov_mnar_true,cov_pivot_partner,cov_pivot_hat,"
      "cov_pivot_true,rv,pred_error,wall_time_s,error\n";
  for (const auto& r : rows) {
    out += std::to_string(kResultsSchemaVersion) + ',' + csv_text(r.method) + ',' +
           std::to_string(r.replicate) + ',' + std::to_string(r.focus_var) + ',' +
           format_double(r.alpha_hat) + ',' + format_double(r.alpha_true) + ',' +
           format_double(r.var_hat) + ',' + format_double(r.var_true) + ',' +
           index_or_na(r.cov_mnar_partner) + ',' + format_double(r.cov_mnar_hat) + ',' +
           format_double(r.cov_mnar_true) + ',' + index_or_na(r.cov_pivot_partner) + ',' +
           format_double(r.cov_pivot_hat) + ',' + format_double(r.cov_pivot_true) + ',' +
           format_double(r.rv) + ',' + format_double(r.pred_error) + ',' +
           format_double(r.wall_time) + ',' + csv_text(r.error) + '\n';
  }
  return out;
}

}  // namespace mnarppca
