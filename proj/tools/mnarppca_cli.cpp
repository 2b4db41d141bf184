// Command-line front end: simulate / estimate / impute / bench.

#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mnarppca/csv.hpp"
#include "mnarppca/harness.hpp"
#include "mnarppca/ppca.hpp"

using namespace mnarppca;
using nlohmann::json;

namespace {

// Accepts column names or 0-based indices.
IndexList resolve_columns(const std::string& spec, const std::vector<std::string>& names) {
  IndexList out;
  if (spec.empty()) return out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto it = std::find(names.begin(), names.end(), item);
    if (it != names.end()) {
      out.push_back(static_cast<Index>(it - names.begin()));
      continue;
    }
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 0 || v >= static_cast<long long>(names.size())) {
      throw Error(ErrorKind::InvalidArgument, "unknown column '" + item + "'");
    }
    out.push_back(static_cast<Index>(v));
  }
  std::sort(out.begin(), out.end());
  return out;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

struct ModelArgs {
  std::string input;
  std::string out;
  std::string config;
  std::string pivots;
  std::string mnar;
  Index rank = 2;
  std::optional<double> sigma2;
  bool estimate_noise = false;
  std::uint64_t seed = 0;
  Index max_combos = 300;
  std::string qc_policy = "SameRegression";
};

void add_model_flags(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("input", a.input, "input CSV (header row, NA for missing)")->required();
  cmd->add_option("--out", a.out, "output path (stdout when omitted)");
  cmd->add_option("--rank", a.rank, "latent dimension r");
  auto* s2 = cmd->add_option("--sigma2", a.sigma2, "noise variance");
  auto* est = cmd->add_flag("--estimate-noise", a.estimate_noise, "estimate the noise variance");
  s2->excludes(est);
  cmd->add_option("--pivots", a.pivots, "pivot candidates (names or 0-based indices)")->required();
  cmd->add_option("--mnar", a.mnar, "MNAR columns (names or 0-based indices)")->required();
  cmd->add_option("--seed", a.seed, "seed for sampling pivot combinations");
  cmd->add_option("--max-combos", a.max_combos, "pivot combination budget");
  cmd->add_option("--qc-policy", a.qc_policy, "SameRegression or FullRows");
}

PipelineResult run_model(const ModelArgs& a, Dataset& data) {
  data = load_csv(a.input);
  data.mnar_vars = resolve_columns(a.mnar, data.column_names);
  data.pivot_vars = resolve_columns(a.pivots, data.column_names);
  if (!a.sigma2 && !a.estimate_noise) {
    throw Error(ErrorKind::InvalidArgument, "give --sigma2 or --estimate-noise");
  }
  EstimatorConfig cfg;
  cfg.rank = a.rank;
  cfg.seed = a.seed;
  cfg.max_combos = a.max_combos;
  cfg.qc_policy = qc_policy_from_string(a.qc_policy);
  return mnar_pipeline(data, cfg, a.sigma2 ? *a.sigma2 : -1.0);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file(path, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPCA estimation and imputation with MNAR variables"};
  app.require_subcommand(1);

  std::string sim_config, sim_out, sim_truth, sim_mask;
  std::optional<std::uint64_t> sim_seed;
  Index sim_replicate = 0;
  auto* simulate = app.add_subcommand("simulate", "draw one synthetic dataset from a config");
  simulate->add_option("--config", sim_config, "experiment JSON")->required();
  simulate->add_option("--seed", sim_seed, "override the data and mechanism seeds");
  simulate->add_option("--replicate", sim_replicate, "replicate index");
  simulate->add_option("--out", sim_out, "observed CSV (NA for missing)")->required();
  simulate->add_option("--truth", sim_truth, "complete-data CSV");
  simulate->add_option("--mask", sim_mask, "0/1 observation mask CSV");

  ModelArgs est_args;
  auto* estimate = app.add_subcommand("estimate", "estimate means, covariance and loadings");
  add_model_flags(estimate, est_args);

  ModelArgs imp_args;
  auto* impute_cmd = app.add_subcommand("impute", "impute missing cells");
  add_model_flags(impute_cmd, imp_args);

  std::string bench_config, bench_out;
  std::optional<std::uint64_t> bench_seed;
  std::optional<Index> bench_rank;
  auto* bench = app.add_subcommand("bench", "run a Monte Carlo benchmark");
  bench->add_option("--config", bench_config, "experiment JSON")->required();
  bench->add_option("--seed", bench_seed, "override the data and mechanism seeds");
  bench->add_option("--rank", bench_rank, "assumed rank");
  bench->add_option("--out", bench_out, "results CSV (config output_path or stdout otherwise)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      ExperimentConfig cfg = load_config(sim_config);
      if (sim_seed) {
        cfg.data_seed = *sim_seed;
        cfg.mechanism_seed = *sim_seed + 1;
      }
      const Replicate rep = simulate_replicate(cfg, sim_replicate);
      write_csv(sim_out, rep.data);
      if (!sim_truth.empty()) write_file(sim_truth, format_csv(rep.complete, rep.data.column_names));
      if (!sim_mask.empty()) {
        write_file(sim_mask, format_csv(rep.data.omega.cast<double>(), rep.data.column_names));
      }
    } else if (*estimate) {
      Dataset data;
      const PipelineResult res = run_model(est_args, data);
      json doc;
      doc["columns"] = data.column_names;
      doc["mnar_vars"] = data.mnar_vars;
      doc["pivot_vars"] = data.pivot_vars;
      doc["rank"] = est_args.rank;
      doc["sigma2"] = res.sigma2;
      doc["alpha_hat"] = std::vector<double>(res.estimates.alpha_hat.data(),
                                             res.estimates.alpha_hat.data() + res.estimates.alpha_hat.size());
      doc["sigma_hat"] = matrix_json(res.estimates.sigma_hat);
      doc["b_hat"] = matrix_json(res.loadings.b_hat);
      json prov = json::array();
      for (Index i = 0; i < data.cols(); ++i) {
        json row = json::array();
        for (Index j = 0; j < data.cols(); ++j) row.push_back(to_string(res.estimates.source(i, j)));
        prov.push_back(row);
      }
      doc["provenance"] = prov;
      doc["warnings"] = res.estimates.warnings;
      emit(est_args.out, doc.dump(2) + "\n");
    } else if (*impute_cmd) {
      Dataset data;
      const PipelineResult res = run_model(imp_args, data);
      emit(imp_args.out, format_csv(res.imputed, data.column_names));
    } else if (*bench) {
      ExperimentConfig cfg = load_config(bench_config);
      if (bench_seed) {
        cfg.data_seed = *bench_seed;
        cfg.mechanism_seed = *bench_seed + 1;
      }
      if (bench_rank) cfg.r_assumed = *bench_rank;
      cfg.validate();
      const std::string out = format_results_csv(run_benchmark(cfg));
      emit(bench_out.empty() ? cfg.output_path : bench_out, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
