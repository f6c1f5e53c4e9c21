#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prcd/types.hpp"

namespace prcd {

struct DataSpec {
  std::string generator = "er_svar";  // er_svar | ba_svar | lorenz96
  int d = 20;
  int T = 500;
  int K = 1;
  double edge_prob = 0.15;
  int ba_m = 2;
  double density = 0.15;       // lag matrices
  double spectral_cap = 0.9;
  std::string noise = "gaussian";  // gaussian | laplace | student_t | heteroscedastic
  double dof = 4.0;
  std::string mechanism = "linear";  // linear | tanh
  double forcing = 8.0;  // lorenz96
  double dt = 0.05;      // lorenz96
};

struct PriorSpec {
  std::string source = "corrupt";  // corrupt | file
  std::string mode = "random";     // random | systematic | adversarial | hub_peripheral
  double acc = 0.6;
  double acc_hub = 0.95;
  double acc_periph = 0.2;
  int hub_count = 4;
  std::string path;  // source = file
};

struct ExperimentConfig {
  DataSpec data;
  PriorSpec prior;
  ObjectiveConfig objective;
  OptimizerConfig optimizer;
  std::string variant = "learned_tau";
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output = "out";
};

/// Known variant names: learned_tau/full, trust_mlp, fixed_tau, no_prior,
/// hard_mask, lags_only, no_warm, no_lam, no_l1. Adjusts optimizer/objective
/// knobs accordingly.
void apply_variant(const std::string& variant, ObjectiveConfig& ocfg, OptimizerConfig& cfg);

std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);

/// FNV-1a over the canonical JSON dump, as a 16-hex-digit string.
std::string config_hash(const ExperimentConfig& config);
std::string build_id();

uint64_t mix_seed(uint64_t a, uint64_t b);

struct RunRow {
  std::string config_hash;
  uint64_t seed = 0;
  std::string build;
  double acc = 0.0;
  std::string variant;
  MetricsReport metrics;
  std::string prior_hash;  // empty for no_prior
  std::string status = "ok";  // or error class name
};

struct RunArtifacts {
  RunRow row;
  FitResult fit;
  GroundTruth truth;
  PriorMatrix prior;
  TimeSeriesData data;
};

/// Graph + series generation for one cell; shared by run_single and the CLI.
std::pair<TimeSeriesData, GroundTruth> generate_data(const DataSpec& spec, uint64_t data_seed);
PriorMatrix build_prior(const PriorSpec& spec, const GroundTruth& truth, uint64_t prior_seed);

/// Generation -> prior -> fit -> metrics for one seed. Errors are captured in
/// row.status; the fit artifacts are only meaningful when status == "ok".
RunArtifacts run_single(const ExperimentConfig& config, uint64_t seed);

std::string csv_header();
std::string csv_row(const RunRow& row);

struct GridResult {
  std::vector<RunRow> rows;          // per (config, seed), sorted
  std::vector<std::string> aggregate_lines;  // aggregate CSV (with header)
  int failed = 0;
};

/// All configs x their seeds, up to `parallelism` cells at a time. Rows are
/// sorted by (config hash, seed) so parallel and serial runs emit identical
/// tables.
GridResult run_grid(const std::vector<ExperimentConfig>& configs, int parallelism);

/// Wide AUROC table in the usual reporting shape: one row per (acc, variant),
/// one "mean+-std" column per T. Lines include a header; empty cells for
/// combinations the grid did not cover.
std::vector<std::string> auroc_pivot(const GridResult& result,
                                     const std::vector<ExperimentConfig>& configs);

/// Ablation suite: the 8 named variants on shared data/prior per seed.
GridResult ablation_suite(const ExperimentConfig& base, const std::vector<uint64_t>& seeds,
                          int parallelism);

/// Cartesian expansion of dotted-path axes, e.g. {"prior.acc": [0.4,0.9]}.
std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base,
                                          const std::string& axes_json_text);

}  // namespace prcd
