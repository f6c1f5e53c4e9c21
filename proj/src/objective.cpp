#include "prcd/objective.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

#include "prcd/calibration.hpp"

namespace prcd {

double huber_loss(const Matrix& residuals, double delta) {
  if (delta <= 0.0) throw ParameterError("huber_loss: delta must be positive");
  double acc = 0.0;
  const double* p = residuals.data();
  const auto n = residuals.size();
  for (Eigen::Index t = 0; t < n; ++t) {
    double a = std::abs(p[t]);
    acc += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
  }
  return acc / static_cast<double>(n);
}

Prediction predict(const WeightStack& weights, const TimeSeriesData& data) {
  const int K = weights.lag_order();
  const int T = data.rows();
  if (T <= K) throw ParameterError("predict: need T > K");
  const int n = T - K;
  const Matrix& x = data.observations;

  Prediction out;
  out.predicted.noalias() = x.block(K, 0, n, x.cols()) * weights.instantaneous_masked();
  for (int k = 1; k <= K; ++k)
    out.predicted.noalias() += x.block(K - k, 0, n, x.cols()) * weights.w[static_cast<size_t>(k)];
  out.residuals = x.block(K, 0, n, x.cols()) - out.predicted;
  return out;
}

DagPenalty dag_penalty(const Matrix& w0_masked, double s) {
  if (s <= 0.0) throw ParameterError("dag_penalty: s must be positive");
  const int d = static_cast<int>(w0_masked.rows());
  Matrix m = -w0_masked.cwiseProduct(w0_masked);
  m.diagonal().array() += s;
  Eigen::PartialPivLU<Matrix> lu(m);
  double det = lu.determinant();
  if (!(det > 0.0) || !std::isfinite(det))
    throw ConstraintDomainError("dag_penalty: sI - W o W left the log-det domain");
  DagPenalty out;
  out.h = -std::log(det) + d * std::log(s);
  out.grad = 2.0 * w0_masked.cwiseProduct(lu.inverse().transpose());
  return out;
}

Evaluation map_objective(const WeightStack& weights, const TimeSeriesData& data,
                         const CalibratedPrior& calibrated, const ObjectiveConfig& config) {
  const int K = weights.lag_order();
  const int T = data.rows();
  const int d = weights.dim();
  const int n = T - K;
  const double delta = config.huber_delta;
  const Matrix& x = data.observations;

  Prediction pred = predict(weights, data);
  Evaluation ev;
  ev.value = huber_loss(pred.residuals, delta);
  ev.grad = WeightStack(K, d);

  // psi = clipped residuals; dL/dW_k = -(1/(n d)) X_k^T psi
  Matrix psi = pred.residuals.cwiseMax(-delta).cwiseMin(delta);
  const double inv = 1.0 / (static_cast<double>(n) * d);
  for (int k = 0; k <= K; ++k) {
    ev.grad.w[static_cast<size_t>(k)].noalias() = -inv * (x.block(K - k, 0, n, d).transpose() * psi);
  }
  ev.grad.w[0].diagonal().setZero();

  const Matrix c = l1_weights(calibrated);
  const Matrix omega = precision_mask(calibrated);
  const double l1 = config.lambda1;
  const double l2 = config.lambda2;

  for (int k = 0; k <= K; ++k) {
    const Matrix& wk = weights.w[static_cast<size_t>(k)];
    Matrix& gk = ev.grad.w[static_cast<size_t>(k)];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (k == 0 && i == j) continue;
        double w = wk(i, j);
        double cw = (k == 0) ? c(i, j) : 1.0;
        double sgn = w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0);
        ev.value += l1 * cw * std::abs(w) + 0.5 * l2 * omega(i, j) * w * w;
        gk(i, j) += l1 * cw * sgn + l2 * omega(i, j) * w;
      }
  }
  return ev;
}

Evaluation augmented_lagrangian(const WeightStack& weights, const TimeSeriesData& data,
                                const CalibratedPrior& calibrated, const ObjectiveConfig& config,
                                const AlmState& alm) {
  DagPenalty dag = dag_penalty(weights.instantaneous_masked(), config.dag_s);
  Evaluation ev = map_objective(weights, data, calibrated, config);
  ev.value += alm.alpha * dag.h + 0.5 * alm.rho * dag.h * dag.h;
  Matrix dg = (alm.alpha + alm.rho * dag.h) * dag.grad;
  dg.diagonal().setZero();
  ev.grad.w[0] += dg;
  return ev;
}

Matrix agreement_labels(const WeightStack& w_star) {
  // Rank-normalized combined-lag strengths: the soft label of an edge is the
  // fraction of off-diagonal entries with strictly smaller max_k |W*_k,ij|.
  // Tied masses (exact zeros in particular) share the lower rank, so an
  // all-zero stack keeps labels at 0 (degenerate warm start).
  const int d = w_star.dim();
  Matrix s = w_star.instantaneous_masked().cwiseAbs();
  for (size_t k = 1; k < w_star.w.size(); ++k) s = s.cwiseMax(w_star.w[k].cwiseAbs());
  s.diagonal().setZero();

  struct Entry {
    double v;
    int i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<size_t>(d) * (d - 1));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) entries.push_back({s(i, j), i, j});
  std::sort(entries.begin(), entries.end(),
            [](const Entry& l, const Entry& r) { return l.v < r.v; });

  Matrix labels = Matrix::Zero(d, d);
  const double n = static_cast<double>(entries.size());
  size_t a = 0;
  while (a < entries.size()) {
    size_t b = a;
    while (b + 1 < entries.size() && entries[b + 1].v == entries[a].v) ++b;
    double label = static_cast<double>(a) / (n - 1.0);  // strictly-smaller count
    for (size_t t = a; t <= b; ++t) labels(entries[t].i, entries[t].j) = label;
    a = b + 1;
  }
  return labels;
}

Matrix regressor_norms(const TimeSeriesData& data) {
  const int K = data.lag_order;
  const int T = data.rows();
  const int d = data.dim();
  if (T <= K) throw ParameterError("regressor_norms: need T > K");
  const int n = T - K;
  Matrix q(K + 1, d);
  for (int k = 0; k <= K; ++k)
    q.row(k) = data.observations.block(K - k, 0, n, d).colwise().squaredNorm() /
               (static_cast<double>(T) * d);
  return q;
}

namespace {

struct EbCore {
  double value_ab = 0.0;
  Matrix grad_tau;  // d x d, diagonal 0
};

// A(tau) + B(tau) of the EB objective plus d(A+B)/dtau per edge; the C
// regularizer is variant-specific and added by the callers.
EbCore eb_core(const PriorMatrix& prior, const Matrix& tau_edge, const Matrix& labels,
               const Matrix& norms, double lambda2) {
  const int d = prior.dim();
  const int lags = static_cast<int>(norms.rows());
  EbCore out;
  out.grad_tau = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) {
        // P_hat fixed at 0.5: constant Laplace contribution, no tau gradient.
        for (int k = 0; k < lags; ++k)
          out.value_ab += 0.5 * std::log(norms(k, i) + lambda2 * (0.5 + kOmegaDelta));
        continue;
      }
      double u = logit(clip(prior.values(i, j), kEpsClip, 1.0 - kEpsClip));
      double phat = sigmoid(u * tau_edge(i, j));
      double lab = labels(i, j);
      out.value_ab -= lab * std::log(phat) + (1.0 - lab) * std::log(1.0 - phat);
      double dphat = phat * (1.0 - phat) * u;
      double g = (phat - lab) * u;  // dBCE/dtau, simplified
      double omega = 1.0 - phat + kOmegaDelta;
      for (int k = 0; k < lags; ++k) {
        double h = norms(k, i) + lambda2 * omega;
        out.value_ab += 0.5 * std::log(h);
        g -= 0.5 * (lambda2 / h) * dphat;
      }
      out.grad_tau(i, j) = g;
    }
  return out;
}

Matrix tau_from_groups(const Vector& tau, const IntMatrix& groups) {
  const int d = static_cast<int>(groups.rows());
  Matrix t = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) t(i, j) = tau(groups(i, j));
  return t;
}

}  // namespace

EbGroupedEval eb_objective_grouped(const Vector& tau, const WeightStack& w_star,
                                   const TimeSeriesData& data, const PriorMatrix& prior,
                                   const IntMatrix& groups, const ObjectiveConfig& config) {
  const int d = prior.dim();
  EbCore core = eb_core(prior, tau_from_groups(tau, groups), agreement_labels(w_star),
                        regressor_norms(data), config.lambda2);
  EbGroupedEval ev;
  ev.value = core.value_ab;
  ev.grad = Vector::Zero(tau.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) ev.grad(groups(i, j)) += core.grad_tau(i, j);
  const double inv_var = 1.0 / (kSigmaTau * kSigmaTau);
  for (Eigen::Index g = 0; g < tau.size(); ++g) {
    ev.value += 0.5 * inv_var * (tau(g) - 0.5) * (tau(g) - 0.5);
    ev.grad(g) += inv_var * (tau(g) - 0.5);
  }
  return ev;
}

EbMlpEval eb_objective_mlp(const MlpParams& theta, double bias_b, const WeightStack& w_star,
                           const TimeSeriesData& data, const PriorMatrix& prior,
                           const ObjectiveConfig& config) {
  const int d = prior.dim();
  TrustFeatures feats = trust_features(prior, w_star);
  Matrix tau = trust_mlp_forward(feats, theta, bias_b);
  EbCore core =
      eb_core(prior, tau, agreement_labels(w_star), regressor_norms(data), config.lambda2);

  EbMlpEval ev;
  ev.value = core.value_ab;
  const double inv_var = 1.0 / (kSigmaTau * kSigmaTau);
  Matrix dtau = core.grad_tau;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) {
        ev.value += 0.5 * inv_var * (tau(i, j) - 0.5) * (tau(i, j) - 0.5);
        dtau(i, j) += inv_var * (tau(i, j) - 0.5);
      }
  ev.grad = trust_mlp_backward(feats, theta, bias_b, dtau);
  return ev;
}

EbGroupedEval eb_objective_crossfit(const Vector& tau, const WeightStack& w_star_from_half_a,
                                    const TimeSeriesData& data_half_b, const PriorMatrix& prior,
                                    const IntMatrix& groups, const ObjectiveConfig& config) {
  if (data_half_b.rows() < data_half_b.lag_order + 2)
    throw SplitError("eb_objective_crossfit: second half shorter than K+2");
  return eb_objective_grouped(tau, w_star_from_half_a, data_half_b, prior, groups, config);
}

}  // namespace prcd
