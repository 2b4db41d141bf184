#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mnarppca/estimators.hpp"

namespace mnarppca {

/// A block of columns sharing one missingness law. Self-masked and general
/// laws are calibrated to `missing_rate` with the standardized `slope`
/// unless `phi0`/`phi1` are given explicitly. General laws read the column
/// itself plus `extra_deps` other columns of the same group, chosen once per
/// experiment.
struct MechanismGroup {
  MechanismKind kind = MechanismKind::SelfMaskedLogistic;
  IndexList columns;
  double missing_rate = 0.5;
  double slope = -3.0;
  std::optional<double> phi0;
  std::optional<double> phi1;
  Index extra_deps = 2;
};

struct ExperimentConfig {
  Index n = 1000;
  Index p = 10;
  Index r = 2;
  Index r_assumed = 0;  // 0: use r
  double sigma = 0.1;
  double alpha_lo = 0.0;
  double alpha_hi = 2.0;
  std::uint64_t alpha_seed = 1;
  std::uint64_t loading_seed = 2;
  std::uint64_t data_seed = 3;
  std::uint64_t mechanism_seed = 4;
  std::vector<MechanismGroup> mechanisms;
  IndexList mnar_vars;
  IndexList pivot_vars;
  std::vector<std::string> methods{"MNAR"};
  Index replications = 1;
  Index max_combos = 300;
  QcPolicy qc_policy = QcPolicy::SameRegression;
  bool estimate_noise = false;
  Index focus_var = 0;
  Index mnar_partner = -1;   // -1: first other MNAR column
  Index pivot_partner = -1;  // -1: first pivot
  Index soft_grid = 20;
  Index threads = 1;
  bool record_wall_time = false;
  std::string output_path;

  Index assumed_rank() const { return r_assumed > 0 ? r_assumed : r; }
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Everything drawn for one replicate.
struct Replicate {
  PpcaParams params;
  MechanismMap mechanisms;
  Matrix complete;
  Dataset data;
};

/// Parameters are shared by all replicates; data and masks use per-replicate
/// seeds derived from the base seeds, so any replicate can be rebuilt alone.
PpcaParams experiment_params(const ExperimentConfig& config);
MechanismMap experiment_mechanisms(const ExperimentConfig& config, const PpcaParams& params);
Replicate simulate_replicate(const ExperimentConfig& config, Index replicate);

inline constexpr int kResultsSchemaVersion = 1;

struct BenchmarkRow {
  std::string method;
  Index replicate = 0;
  Index focus_var = 0;
  double alpha_hat = 0.0;
  double alpha_true = 0.0;
  double var_hat = 0.0;
  double var_true = 0.0;
  Index cov_mnar_partner = -1;
  double cov_mnar_hat = 0.0;
  double cov_mnar_true = 0.0;
  Index cov_pivot_partner = -1;
  double cov_pivot_hat = 0.0;
  double cov_pivot_true = 0.0;
  double rv = 0.0;
  double pred_error = 0.0;
  double wall_time = 0.0;
  std::string error;
};

const std::vector<std::string>& known_methods();
bool method_implemented(const std::string& method);

/// Runs one method on one replicate; failures land in `error`.
BenchmarkRow run_method(const ExperimentConfig& config, const Replicate& rep,
                        const std::string& method, Index replicate);

/// All (method, replicate) rows sorted by method then replicate.
std::vector<BenchmarkRow> run_benchmark(const ExperimentConfig& config);

std::string format_results_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace mnarppca
