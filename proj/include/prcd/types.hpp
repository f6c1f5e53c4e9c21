#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prcd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

// ---------------------------------------------------------------- errors

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InstabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Argument of the log-det acyclicity penalty left its domain; the caller is
// expected to backtrack.
struct ConstraintDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SplitError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UndefinedMetricError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- data

/// Coefficient matrices W_0..W_K. All instantaneous terms consume the
/// diagonal-masked W_0.
struct WeightStack {
  std::vector<Matrix> w;

  WeightStack() = default;
  WeightStack(int lags, int d) : w(static_cast<size_t>(lags) + 1, Matrix::Zero(d, d)) {}

  int lag_order() const { return static_cast<int>(w.size()) - 1; }
  int dim() const { return w.empty() ? 0 : static_cast<int>(w[0].rows()); }

  /// W_0 with the diagonal zeroed.
  Matrix instantaneous_masked() const {
    Matrix m = w.at(0);
    m.diagonal().setZero();
    return m;
  }
};

struct TimeSeriesData {
  Matrix observations;  // T x d, standardized
  int lag_order = 1;    // K

  int rows() const { return static_cast<int>(observations.rows()); }
  int dim() const { return static_cast<int>(observations.cols()); }
};

struct GroundTruth {
  std::vector<IntMatrix> adjacency_per_lag;  // K+1 binary d x d
  IntMatrix combined;                        // entrywise OR over lags
  WeightStack weights;

  int dim() const { return combined.rows() > 0 ? static_cast<int>(combined.rows()) : weights.dim(); }
};

struct NoiseSpec {
  enum class Family { Gaussian, Laplace, StudentT, Heteroscedastic };
  Family family = Family::Gaussian;
  double degrees_of_freedom = 4.0;              // student_t only
  std::optional<Vector> per_variable_scales;    // heteroscedastic only, in [0.5, 1.5]
};

enum class Mechanism { Linear, TanhNonlinear };

// ---------------------------------------------------------------- prior

struct PriorMatrix {
  Matrix values;  // d x d in [0,1], zero diagonal
  std::string provenance;

  int dim() const { return static_cast<int>(values.rows()); }
};

struct CorruptionSpec {
  enum class Mode { Random, Systematic, Adversarial, HubPeripheral };
  Mode mode = Mode::Random;
  double accuracy = 0.9;
  double acc_hub = 0.95;     // hub_peripheral only
  double acc_periph = 0.2;   // hub_peripheral only
  int hub_count = 4;         // hub_peripheral only
};

// ---------------------------------------------------------------- trust

constexpr double kTauMin = 1e-3;
constexpr double kTauMax = 2.0;
constexpr double kEpsClip = 1e-3;       // prior clipping before logit
constexpr double kOmegaDelta = 1e-3;    // precision-mask stabilizer
constexpr double kSigmaTau = 2.0;       // EB regularizer scale

/// 6 -> 16 -> 1 feed-forward net, tanh hidden, linear output (129 parameters).
struct MlpParams {
  Matrix w1;  // 16 x 6
  Vector b1;  // 16
  Vector w2;  // 16
  double b2 = 0.0;
};

struct TrustParams {
  enum class Variant { Grouped, TrustMlp, Fixed };
  Variant variant = Variant::Grouped;
  Vector tau;             // grouped: length G
  MlpParams mlp;          // trust_mlp
  double bias_b = 0.0;    // trust_mlp global bias
  double tau_const = 1.0; // fixed
};

struct CalibratedPrior {
  Matrix p_hat;         // d x d strictly inside (0,1); diagonal fixed at 0.5
  Matrix tau_realized;  // d x d per-edge temperatures; diagonal 0 (unused)
};

/// Per-edge feature rows for the trust-propagation net. Row e corresponds to
/// the e-th off-diagonal entry in row-major order.
struct TrustFeatures {
  Matrix z;  // (d*(d-1)) x 6
  int d = 0;

  static int edge_index(int i, int j, int d) { return i * (d - 1) + (j > i ? j - 1 : j); }
};

// ---------------------------------------------------------------- objective

struct ObjectiveConfig {
  double lambda1 = 2e-3;
  double lambda2 = 8e-3;
  double huber_delta = 1.35;
  double dag_s = 1.0;
};

struct AlmState {
  double alpha = 0.0;
  double rho = 1.0;
  int outer_iter = 0;
};

// ---------------------------------------------------------------- optimizer

struct OptimizerConfig {
  int outer_iters = 35;            // I
  int inner_iters = 400;           // J
  int middle_iters = 8;            // S (0 = fixed-tau ablation)
  double inner_lr = 8e-3;          // cosine-decayed per inner loop
  double middle_lr = 0.5;          // per-edge units, see eb_middle_loop
  double mlp_lr_scale = 20.0;      // trust-MLP steps relative to middle_lr
  double rho0 = 1.0;
  double gamma = 3.0;
  double rho_max = 1e8;
  double dag_tol = 1e-6;
  double lambda_warm_factor = 5.0;
  double threshold_ratio = 0.1;    // beta_thr
  int inner_patience = 50;
  double inner_stall_tol = 1e-6;
  double ridge_penalty = 1e-2;     // warm start
  int groups = 4;                  // G

  TrustParams::Variant trust_variant = TrustParams::Variant::Grouped;
  double fixed_tau_const = 1.0;    // for Variant::Fixed

  // ablation switches
  bool warm_start = true;          // NoWarm: false
  bool hard_mask = false;          // HardMask: zero entries with P_prior < 0.5
  bool lags_only = false;          // LagsOnly: no instantaneous head
};

struct OuterRecord {
  double h = 0.0;
  double loss = 0.0;
  double mean_tau = 0.0;
  double lambda1_eff = 0.0;
  double rho = 0.0;
};

struct FitResult {
  WeightStack weights;      // post-threshold
  WeightStack weights_raw;  // pre-threshold, for scoring
  TrustParams trust;
  Matrix tau_realized;      // d x d, diagonal 0
  std::vector<OuterRecord> trajectory;
  int outer_iterations = 0;
  double final_h = 0.0;
};

// ---------------------------------------------------------------- metrics

struct MetricsReport {
  double auroc = 0.0;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  int shd = 0;
  double tau_mean = 0.0;
  double prior_agreement = 0.0;
  double rho_cons = 0.0;
};

inline double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

inline double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Mean of the off-diagonal entries.
inline double offdiag_mean(const Matrix& m) {
  const int d = static_cast<int>(m.rows());
  if (d < 2) return 0.0;
  double s = m.sum() - m.diagonal().sum();
  return s / (static_cast<double>(d) * (d - 1));
}

}  // namespace prcd
