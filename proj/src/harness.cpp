#include "prcd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "prcd/datagen.hpp"
#include "prcd/evaluation.hpp"
#include "prcd/io.hpp"
#include "prcd/optimizer.hpp"
#include "prcd/prior.hpp"

#ifndef PRCD_BUILD_ID
#define PRCD_BUILD_ID "unversioned"
#endif

namespace prcd {

using nlohmann::json;

std::string build_id() { return PRCD_BUILD_ID; }

uint64_t mix_seed(uint64_t a, uint64_t b) {
  // splitmix64 over the combined word
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void apply_variant(const std::string& variant, ObjectiveConfig& ocfg, OptimizerConfig& cfg) {
  if (variant == "learned_tau" || variant == "full") {
    cfg.trust_variant = TrustParams::Variant::Grouped;
  } else if (variant == "trust_mlp") {
    cfg.trust_variant = TrustParams::Variant::TrustMlp;
  } else if (variant == "fixed_tau") {
    cfg.trust_variant = TrustParams::Variant::Fixed;
    cfg.fixed_tau_const = 1.0;
    cfg.middle_iters = 0;
  } else if (variant == "no_prior") {
    cfg.trust_variant = TrustParams::Variant::Fixed;
    cfg.fixed_tau_const = kTauMin;
    cfg.middle_iters = 0;
  } else if (variant == "hard_mask") {
    cfg.trust_variant = TrustParams::Variant::Fixed;
    cfg.fixed_tau_const = kTauMin;
    cfg.middle_iters = 0;
    cfg.hard_mask = true;
  } else if (variant == "lags_only") {
    cfg.trust_variant = TrustParams::Variant::Grouped;
    cfg.lags_only = true;
  } else if (variant == "no_warm") {
    cfg.trust_variant = TrustParams::Variant::Grouped;
    cfg.warm_start = false;
  } else if (variant == "no_lam") {
    cfg.trust_variant = TrustParams::Variant::Grouped;
    cfg.lambda_warm_factor = 1.0;
  } else if (variant == "no_l1") {
    cfg.trust_variant = TrustParams::Variant::Grouped;
    ocfg.lambda1 = 0.0;
  } else {
    throw ParameterError("unknown variant: " + variant);
  }
}

// ------------------------------------------------------------ config (de)serialization

namespace {

json data_to_json(const DataSpec& s) {
  return json{{"generator", s.generator}, {"d", s.d},       {"T", s.T},
              {"K", s.K},                 {"edge_prob", s.edge_prob},
              {"ba_m", s.ba_m},           {"density", s.density},
              {"spectral_cap", s.spectral_cap}, {"noise", s.noise},
              {"dof", s.dof},             {"mechanism", s.mechanism},
              {"forcing", s.forcing},     {"dt", s.dt}};
}

json prior_to_json(const PriorSpec& s) {
  return json{{"source", s.source},   {"mode", s.mode},           {"acc", s.acc},
              {"acc_hub", s.acc_hub}, {"acc_periph", s.acc_periph},
              {"hub_count", s.hub_count}, {"path", s.path}};
}

json objective_to_json(const ObjectiveConfig& s) {
  return json{{"lambda1", s.lambda1},
              {"lambda2", s.lambda2},
              {"huber_delta", s.huber_delta},
              {"dag_s", s.dag_s}};
}

json optimizer_to_json(const OptimizerConfig& s) {
  return json{{"outer_iters", s.outer_iters},
              {"inner_iters", s.inner_iters},
              {"middle_iters", s.middle_iters},
              {"inner_lr", s.inner_lr},
              {"middle_lr", s.middle_lr},
              {"rho0", s.rho0},
              {"gamma", s.gamma},
              {"rho_max", s.rho_max},
              {"dag_tol", s.dag_tol},
              {"lambda_warm_factor", s.lambda_warm_factor},
              {"threshold_ratio", s.threshold_ratio},
              {"inner_patience", s.inner_patience},
              {"inner_stall_tol", s.inner_stall_tol},
              {"ridge_penalty", s.ridge_penalty},
              {"mlp_lr_scale", s.mlp_lr_scale},
              {"groups", s.groups}};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void data_from_json(const json& j, DataSpec& s) {
  maybe(j, "generator", s.generator);
  maybe(j, "d", s.d);
  maybe(j, "T", s.T);
  maybe(j, "K", s.K);
  maybe(j, "edge_prob", s.edge_prob);
  maybe(j, "ba_m", s.ba_m);
  maybe(j, "density", s.density);
  maybe(j, "spectral_cap", s.spectral_cap);
  maybe(j, "noise", s.noise);
  maybe(j, "dof", s.dof);
  maybe(j, "mechanism", s.mechanism);
  maybe(j, "forcing", s.forcing);
  maybe(j, "dt", s.dt);
}

void prior_from_json(const json& j, PriorSpec& s) {
  maybe(j, "source", s.source);
  maybe(j, "mode", s.mode);
  maybe(j, "acc", s.acc);
  maybe(j, "acc_hub", s.acc_hub);
  maybe(j, "acc_periph", s.acc_periph);
  maybe(j, "hub_count", s.hub_count);
  maybe(j, "path", s.path);
}

void objective_from_json(const json& j, ObjectiveConfig& s) {
  maybe(j, "lambda1", s.lambda1);
  maybe(j, "lambda2", s.lambda2);
  maybe(j, "huber_delta", s.huber_delta);
  maybe(j, "dag_s", s.dag_s);
}

void optimizer_from_json(const json& j, OptimizerConfig& s) {
  maybe(j, "outer_iters", s.outer_iters);
  maybe(j, "inner_iters", s.inner_iters);
  maybe(j, "middle_iters", s.middle_iters);
  maybe(j, "inner_lr", s.inner_lr);
  maybe(j, "middle_lr", s.middle_lr);
  maybe(j, "rho0", s.rho0);
  maybe(j, "gamma", s.gamma);
  maybe(j, "rho_max", s.rho_max);
  maybe(j, "dag_tol", s.dag_tol);
  maybe(j, "lambda_warm_factor", s.lambda_warm_factor);
  maybe(j, "threshold_ratio", s.threshold_ratio);
  maybe(j, "inner_patience", s.inner_patience);
  maybe(j, "inner_stall_tol", s.inner_stall_tol);
  maybe(j, "ridge_penalty", s.ridge_penalty);
  maybe(j, "mlp_lr_scale", s.mlp_lr_scale);
  maybe(j, "groups", s.groups);
}

json config_to_json_obj(const ExperimentConfig& c) {
  json j;
  j["data"] = data_to_json(c.data);
  j["prior"] = prior_to_json(c.prior);
  j["objective"] = objective_to_json(c.objective);
  j["optimizer"] = optimizer_to_json(c.optimizer);
  j["variant"] = c.variant;
  j["seeds"] = c.seeds;
  j["output"] = c.output;
  return j;
}

ExperimentConfig config_from_json_obj(const json& j) {
  ExperimentConfig c;
  if (j.contains("data")) data_from_json(j.at("data"), c.data);
  if (j.contains("prior")) prior_from_json(j.at("prior"), c.prior);
  if (j.contains("objective")) objective_from_json(j.at("objective"), c.objective);
  if (j.contains("optimizer")) optimizer_from_json(j.at("optimizer"), c.optimizer);
  maybe(j, "variant", c.variant);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  maybe(j, "output", c.output);
  return c;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  return config_to_json_obj(config).dump(1);
}

ExperimentConfig config_from_json_text(const std::string& text) {
  try {
    return config_from_json_obj(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config JSON: ") + e.what());
  }
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return config_from_json_text(ss.str());
}

namespace {

std::string fnv1a_hex(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string config_hash(const ExperimentConfig& config) {
  ExperimentConfig keyed = config;
  keyed.seeds.clear();   // the seed is reported per row
  keyed.output.clear();  // output location does not change the experiment
  return fnv1a_hex(config_to_json_obj(keyed).dump());
}

// ------------------------------------------------------------ single run

std::pair<TimeSeriesData, GroundTruth> generate_data(const DataSpec& s, uint64_t data_seed) {
  if (s.generator == "lorenz96") {
    auto [data, truth] = simulate_lorenz96(s.d, s.T, s.forcing, s.dt, data_seed);
    data.lag_order = s.K;
    return {data, truth};
  }
  GroundTruth truth = s.generator == "ba_svar" ? generate_ba_graph(s.d, s.ba_m, data_seed)
                                               : generate_er_dag(s.d, s.edge_prob, WeightRange{},
                                                                 mix_seed(data_seed, 11));
  NoiseSpec noise;
  if (s.noise == "gaussian")
    noise.family = NoiseSpec::Family::Gaussian;
  else if (s.noise == "laplace")
    noise.family = NoiseSpec::Family::Laplace;
  else if (s.noise == "student_t")
    noise.family = NoiseSpec::Family::StudentT;
  else if (s.noise == "heteroscedastic")
    noise.family = NoiseSpec::Family::Heteroscedastic;
  else
    throw ParameterError("unknown noise family: " + s.noise);
  noise.degrees_of_freedom = s.dof;
  Mechanism mech = s.mechanism == "tanh" ? Mechanism::TanhNonlinear : Mechanism::Linear;

  if (s.K > 0) {
    truth.weights =
        generate_lag_matrices(truth, s.K, s.density, s.spectral_cap, mix_seed(data_seed, 12));
    truth.adjacency_per_lag.assign(1, truth.adjacency_per_lag[0]);
    for (int k = 1; k <= s.K; ++k) {
      const Matrix& wk = truth.weights.w[static_cast<size_t>(k)];
      truth.adjacency_per_lag.push_back((wk.array() != 0.0).cast<int>());
    }
    truth.combined = combined_adjacency(truth.adjacency_per_lag);
  }
  TimeSeriesData data = simulate_svar(truth.weights, s.T, noise, mech, mix_seed(data_seed, 13));
  data.lag_order = s.K;
  return {data, truth};
}

PriorMatrix build_prior(const PriorSpec& s, const GroundTruth& truth, uint64_t prior_seed) {
  if (s.source == "file") return load_prior(s.path, truth.dim());
  CorruptionSpec spec;
  if (s.mode == "random")
    spec.mode = CorruptionSpec::Mode::Random;
  else if (s.mode == "systematic")
    spec.mode = CorruptionSpec::Mode::Systematic;
  else if (s.mode == "adversarial")
    spec.mode = CorruptionSpec::Mode::Adversarial;
  else if (s.mode == "hub_peripheral")
    spec.mode = CorruptionSpec::Mode::HubPeripheral;
  else
    throw ParameterError("unknown corruption mode: " + s.mode);
  spec.accuracy = s.acc;
  spec.acc_hub = s.acc_hub;
  spec.acc_periph = s.acc_periph;
  spec.hub_count = s.hub_count;
  return make_prior(truth, spec, prior_seed);
}

namespace {

std::string prior_fingerprint(const PriorMatrix& p) {
  std::string blob;
  blob.reserve(static_cast<size_t>(p.values.size()) * 18);
  for (int i = 0; i < p.dim(); ++i)
    for (int j = 0; j < p.dim(); ++j) blob += format_g17(p.values(i, j)) + ",";
  return fnv1a_hex(blob);
}

std::string error_class(const std::exception& e) {
  if (dynamic_cast<const ParameterError*>(&e)) return "parameter_error";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension_error";
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const InstabilityError*>(&e)) return "instability_error";
  if (dynamic_cast<const ConstraintDomainError*>(&e)) return "constraint_domain_error";
  if (dynamic_cast<const DivergedError*>(&e)) return "diverged_error";
  if (dynamic_cast<const SplitError*>(&e)) return "split_error";
  if (dynamic_cast<const UndefinedMetricError*>(&e)) return "undefined_metric_error";
  return "error";
}

}  // namespace

RunArtifacts run_single(const ExperimentConfig& config, uint64_t seed) {
  RunArtifacts art;
  art.row.config_hash = config_hash(config);
  art.row.seed = seed;
  art.row.build = build_id();
  art.row.variant = config.variant;
  art.row.acc = config.prior.mode == "hub_peripheral" ? config.prior.acc_hub : config.prior.acc;
  try {
    ObjectiveConfig ocfg = config.objective;
    OptimizerConfig cfg = config.optimizer;
    apply_variant(config.variant, ocfg, cfg);

    auto [data, truth] = generate_data(config.data, seed);
    PriorMatrix prior = build_prior(config.prior, truth, mix_seed(seed, 101));
    art.row.prior_hash = config.variant == "no_prior" ? "" : prior_fingerprint(prior);

    FitResult fit_result = fit(data, prior, ocfg, cfg, mix_seed(seed, 202));
    art.row.metrics = score_fit(fit_result, truth, prior, data);
    art.fit = std::move(fit_result);
    art.truth = std::move(truth);
    art.prior = std::move(prior);
    art.data = std::move(data);
  } catch (const std::exception& e) {
    art.row.status = error_class(e);
  }
  return art;
}

std::string csv_header() {
  return "config_hash,seed,build_id,acc,variant,auroc,best_f1,best_f1_threshold,shd,tau_mean,"
         "prior_agreement,rho_cons,prior_hash,status";
}

std::string csv_row(const RunRow& r) {
  std::ostringstream ss;
  ss << r.config_hash << ',' << r.seed << ',' << r.build << ',' << format_g17(r.acc) << ','
     << r.variant << ',' << format_g17(r.metrics.auroc) << ',' << format_g17(r.metrics.best_f1)
     << ',' << format_g17(r.metrics.best_f1_threshold) << ',' << r.metrics.shd << ','
     << format_g17(r.metrics.tau_mean) << ',' << format_g17(r.metrics.prior_agreement) << ','
     << format_g17(r.metrics.rho_cons) << ',' << r.prior_hash << ',' << r.status;
  return ss.str();
}

namespace {

struct Cell {
  const ExperimentConfig* config;
  uint64_t seed;
};

struct Agg {
  int n = 0, failed = 0;
  double sum_auroc = 0, sum2_auroc = 0, sum_f1 = 0, sum2_f1 = 0, sum_tau = 0, sum_shd = 0;
};

std::vector<std::string> aggregate(const std::vector<RunRow>& rows,
                                   const std::vector<ExperimentConfig>& configs) {
  std::vector<std::string> lines;
  lines.push_back(
      "config_hash,acc,variant,T,n_seeds,n_failed,auroc_mean,auroc_std,best_f1_mean,best_f1_std,"
      "tau_mean,shd_mean");
  std::map<std::string, Agg> by_hash;
  std::map<std::string, const ExperimentConfig*> cfg_of;
  for (const auto& c : configs) cfg_of[config_hash(c)] = &c;
  for (const RunRow& r : rows) {
    Agg& a = by_hash[r.config_hash];
    if (r.status != "ok") {
      ++a.failed;
      continue;
    }
    ++a.n;
    a.sum_auroc += r.metrics.auroc;
    a.sum2_auroc += r.metrics.auroc * r.metrics.auroc;
    a.sum_f1 += r.metrics.best_f1;
    a.sum2_f1 += r.metrics.best_f1 * r.metrics.best_f1;
    a.sum_tau += r.metrics.tau_mean;
    a.sum_shd += r.metrics.shd;
  }
  for (const auto& [hash, a] : by_hash) {
    const ExperimentConfig* c = cfg_of.count(hash) ? cfg_of.at(hash) : nullptr;
    auto mean_std = [&](double s, double s2) -> std::pair<double, double> {
      if (a.n == 0) return {0.0, 0.0};
      double mean = s / a.n;
      double var = a.n > 1 ? std::max(0.0, (s2 - a.n * mean * mean) / (a.n - 1)) : 0.0;
      return {mean, std::sqrt(var)};
    };
    auto [am, as] = mean_std(a.sum_auroc, a.sum2_auroc);
    auto [fm, fs] = mean_std(a.sum_f1, a.sum2_f1);
    std::ostringstream ss;
    ss << hash << ',' << (c ? format_g17(c->prior.mode == "hub_peripheral" ? c->prior.acc_hub
                                                                           : c->prior.acc)
                            : "")
       << ',' << (c ? c->variant : "") << ',' << (c ? std::to_string(c->data.T) : "") << ','
       << a.n << ',' << a.failed << ',' << format_g17(am) << ',' << format_g17(as) << ','
       << format_g17(fm) << ',' << format_g17(fs) << ','
       << format_g17(a.n ? a.sum_tau / a.n : 0.0) << ','
       << format_g17(a.n ? a.sum_shd / a.n : 0.0);
    lines.push_back(ss.str());
  }
  return lines;
}

}  // namespace

GridResult run_grid(const std::vector<ExperimentConfig>& configs, int parallelism) {
  if (configs.empty()) throw ParameterError("run_grid: need at least one config");
  std::vector<Cell> cells;
  for (const auto& c : configs)
    for (uint64_t s : c.seeds) cells.push_back({&c, s});

  GridResult result;
  result.rows.resize(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) break;
      result.rows[idx] = run_single(*cells[idx].config, cells[idx].seed).row;
    }
  };
  int nthreads = std::max(1, std::min<int>(parallelism, static_cast<int>(cells.size())));
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::sort(result.rows.begin(), result.rows.end(), [](const RunRow& l, const RunRow& r) {
    return l.config_hash != r.config_hash ? l.config_hash < r.config_hash : l.seed < r.seed;
  });
  for (const RunRow& r : result.rows)
    if (r.status != "ok") ++result.failed;
  result.aggregate_lines = aggregate(result.rows, configs);
  return result;
}

std::vector<std::string> auroc_pivot(const GridResult& result,
                                     const std::vector<ExperimentConfig>& configs) {
  struct Cell {
    double sum = 0, sum2 = 0;
    int n = 0;
  };
  std::map<std::string, const ExperimentConfig*> cfg_of;
  for (const auto& c : configs) cfg_of[config_hash(c)] = &c;
  std::set<int> ts;
  std::map<std::pair<double, std::string>, std::map<int, Cell>> table;
  for (const RunRow& r : result.rows) {
    if (r.status != "ok" || !cfg_of.count(r.config_hash)) continue;
    const ExperimentConfig* c = cfg_of.at(r.config_hash);
    ts.insert(c->data.T);
    Cell& cell = table[{r.acc, r.variant}][c->data.T];
    cell.sum += r.metrics.auroc;
    cell.sum2 += r.metrics.auroc * r.metrics.auroc;
    ++cell.n;
  }
  std::vector<std::string> lines;
  std::ostringstream head;
  head << "acc,variant";
  for (int t : ts) head << ",auroc_T" << t;
  lines.push_back(head.str());
  for (const auto& [key, by_t] : table) {
    std::ostringstream row;
    row << format_g17(key.first) << ',' << key.second;
    for (int t : ts) {
      row << ',';
      auto it = by_t.find(t);
      if (it == by_t.end()) continue;
      const Cell& c = it->second;
      double mean = c.sum / c.n;
      double var = c.n > 1 ? std::max(0.0, (c.sum2 - c.n * mean * mean) / (c.n - 1)) : 0.0;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f+-%.3f", mean, std::sqrt(var));
      row << buf;
    }
    lines.push_back(row.str());
  }
  return lines;
}

GridResult ablation_suite(const ExperimentConfig& base, const std::vector<uint64_t>& seeds,
                          int parallelism) {
  static const char* kVariants[] = {"full",    "lags_only", "no_warm", "no_prior",
                                    "fixed_tau", "no_lam",  "no_l1",   "hard_mask"};
  std::vector<ExperimentConfig> configs;
  for (const char* v : kVariants) {
    ExperimentConfig c = base;
    c.variant = v;
    c.seeds = seeds;
    configs.push_back(std::move(c));
  }
  return run_grid(configs, parallelism);
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base,
                                          const std::string& axes_json_text) {
  json axes;
  try {
    axes = json::parse(axes_json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad grid axes JSON: ") + e.what());
  }
  std::vector<json> configs = {json::parse(config_to_json(base))};
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    std::vector<json> next;
    for (const json& c : configs)
      for (const json& v : it.value()) {
        json copy = c;
        // dotted path, e.g. "prior.acc"
        json* node = &copy;
        std::string key = it.key();
        size_t pos;
        while ((pos = key.find('.')) != std::string::npos) {
          node = &(*node)[key.substr(0, pos)];
          key = key.substr(pos + 1);
        }
        (*node)[key] = v;
        next.push_back(std::move(copy));
      }
    configs = std::move(next);
  }
  std::vector<ExperimentConfig> out;
  out.reserve(configs.size());
  for (const json& c : configs) out.push_back(config_from_json_text(c.dump()));
  return out;
}

}  // namespace prcd
