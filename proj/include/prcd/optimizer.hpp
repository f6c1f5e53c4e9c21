#pragma once

#include <cstdint>
#include <functional>

#include "prcd/objective.hpp"
#include "prcd/types.hpp"

namespace prcd {

WeightStack ridge_warm_start(const TimeSeriesData& data, int K, double ridge_penalty);

struct AdamOptions {
  int max_steps = 400;
  double lr = 8e-3;
  int patience = 50;
  double stall_tol = 1e-6;
};

struct InnerResult {
  WeightStack weights;
  double final_value = 0.0;
  int steps = 0;
};

/// Adam (beta1=0.9, beta2=0.999, eps=1e-8) with cosine LR over max_steps,
/// loss-stall early exit, and step-halving backtracking on
/// ConstraintDomainError (at most 10 halvings per step).
InnerResult adam_inner_loop(WeightStack weights,
                            const std::function<Evaluation(const WeightStack&)>& objective,
                            const AdamOptions& options,
                            const std::function<void(WeightStack&)>& project = {});

/// S projected gradient steps on L_EB with W fixed. Gradients are scaled by
/// 1/(d(d-1)) so middle_lr is in per-edge units. Grouped taus are projected
/// onto [tau_min, tau_max]; MLP parameters take plain steps.
TrustParams eb_middle_loop(TrustParams trust, const WeightStack& w_star,
                           const TimeSeriesData& data, const PriorMatrix& prior,
                           const IntMatrix& groups, int S, double middle_lr,
                           const ObjectiveConfig& config, double mlp_lr_scale = 20.0);

/// Realized calibrated prior for the current trust parameters (MLP features
/// come from w_current).
CalibratedPrior realize_calibration(const TrustParams& trust, const PriorMatrix& prior,
                                    const IntMatrix& groups, const WeightStack& w_current);

/// Full pipeline: ridge warm start, Spearman pre-calibration, outer ALM with
/// the lambda1 schedule, Adam inner loop, EB middle loop, final thresholding.
FitResult fit(const TimeSeriesData& data, const PriorMatrix& prior, const ObjectiveConfig& ocfg,
              const OptimizerConfig& cfg, uint64_t rng_seed);

}  // namespace prcd
