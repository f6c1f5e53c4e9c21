#pragma once

#include <cstdint>
#include <utility>

#include "prcd/types.hpp"

namespace prcd {

/// Temperature-scale the prior entrywise: P_hat = sigmoid(logit(clip(P)) * tau).
/// tau_per_edge's diagonal is ignored; p_hat's diagonal is fixed at 0.5.
CalibratedPrior calibrate(const PriorMatrix& prior, const Matrix& tau_per_edge);

CalibratedPrior calibrate_grouped(const PriorMatrix& prior, const Vector& tau,
                                  const IntMatrix& groups);

/// Per-edge l1 modulation c = clip(1.5 - P_hat, 0.1, 1.5).
Matrix l1_weights(const CalibratedPrior& calibrated);

/// Precision mask Omega = (1 - P_hat) + delta.
Matrix precision_mask(const CalibratedPrior& calibrated);

TrustFeatures trust_features(const PriorMatrix& prior, const WeightStack& w_star);

/// Realized per-edge temperatures tau = tau_min + (tau_max - tau_min) *
/// sigmoid(f_theta(z) + b); diagonal set to 0.
Matrix trust_mlp_forward(const TrustFeatures& features, const MlpParams& theta, double bias_b);

/// Backprop helper: given dL/dtau per edge, accumulate gradients on (theta, b).
struct MlpGradients {
  Matrix w1;
  Vector b1;
  Vector w2;
  double b2 = 0.0;
  double bias_b = 0.0;
};
MlpGradients trust_mlp_backward(const TrustFeatures& features, const MlpParams& theta,
                                double bias_b, const Matrix& dloss_dtau);

/// (tau_init, bias_b) from the Spearman rank correlation between |Corr(X)|
/// and the prior.
std::pair<double, double> spearman_precalibrate(const TimeSeriesData& data,
                                                const PriorMatrix& prior);

MlpParams init_mlp(uint64_t rng_seed);

/// Spearman rank correlation with average ranks on ties; 0 if either side is
/// constant.
double spearman(const Vector& a, const Vector& b);

}  // namespace prcd
