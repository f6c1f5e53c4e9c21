#pragma once

#include "prcd/calibration.hpp"
#include "prcd/types.hpp"

namespace prcd {

/// Mean Huber loss over all residual entries.
double huber_loss(const Matrix& residuals, double delta);

struct Prediction {
  Matrix predicted;  // T_eff x d
  Matrix residuals;  // x - x_hat on the effective rows
};

/// x_hat_t = W0~^T x_t + sum_k W_k^T x_{t-k} on t in {K+1..T}. K=0 keeps only
/// the instantaneous term (cross-sectional mode).
Prediction predict(const WeightStack& weights, const TimeSeriesData& data);

struct DagPenalty {
  double h = 0.0;
  Matrix grad;
};

/// Non-negative log-det acyclicity penalty h = -logdet(sI - W o W) + d log s
/// with gradient 2 W o (sI - W o W)^-T. Throws ConstraintDomainError outside
/// the domain.
DagPenalty dag_penalty(const Matrix& w0_masked, double s);

struct Evaluation {
  double value = 0.0;
  WeightStack grad;
};

Evaluation map_objective(const WeightStack& weights, const TimeSeriesData& data,
                         const CalibratedPrior& calibrated, const ObjectiveConfig& config);

Evaluation augmented_lagrangian(const WeightStack& weights, const TimeSeriesData& data,
                                const CalibratedPrior& calibrated, const ObjectiveConfig& config,
                                const AlmState& alm);

/// Soft labels |W0~*_ij| / max |W0~*| (all zero when the max is zero).
Matrix agreement_labels(const WeightStack& w_star);

/// (K+1) x d matrix of ||x^(k)_{.,i}||^2 / (T d) over the effective rows.
Matrix regressor_norms(const TimeSeriesData& data);

struct EbGroupedEval {
  double value = 0.0;
  Vector grad;  // d/d tau_g
};

EbGroupedEval eb_objective_grouped(const Vector& tau, const WeightStack& w_star,
                                   const TimeSeriesData& data, const PriorMatrix& prior,
                                   const IntMatrix& groups, const ObjectiveConfig& config);

struct EbMlpEval {
  double value = 0.0;
  MlpGradients grad;
};

EbMlpEval eb_objective_mlp(const MlpParams& theta, double bias_b, const WeightStack& w_star,
                           const TimeSeriesData& data, const PriorMatrix& prior,
                           const ObjectiveConfig& config);

/// Identical to eb_objective_grouped, with agreement labels from a first-half
/// fit and the Laplace term evaluated on the second chronological half.
EbGroupedEval eb_objective_crossfit(const Vector& tau, const WeightStack& w_star_from_half_a,
                                    const TimeSeriesData& data_half_b, const PriorMatrix& prior,
                                    const IntMatrix& groups, const ObjectiveConfig& config);

}  // namespace prcd
