#pragma once

#include "prcd/types.hpp"

namespace prcd {

struct ScoredGraph {
  Matrix scores;     // d x d nonnegative, diagonal 0
  IntMatrix truth;   // combined binary adjacency
};

/// score_ij = max_k |W_k,ij| from the pre-threshold weights; truth is the
/// entrywise OR of per-lag adjacencies.
ScoredGraph combine_scores(const FitResult& result, const GroundTruth& truth);

/// Mann-Whitney AUROC over off-diagonal entries, ties counted 1/2. Throws
/// UndefinedMetricError when truth has no positive or no negative entry.
double auroc(const ScoredGraph& scored);

struct BestF1 {
  double f1 = 0.0;
  double threshold = 0.0;
};

/// Max F1 over thresholds swept across the unique scores (plus +inf),
/// predicting positive at score >= threshold; smallest threshold on ties.
BestF1 best_f1(const ScoredGraph& scored);

/// Off-diagonal entrywise disagreement count (a reversed edge counts 2).
int shd(const IntMatrix& predicted, const IntMatrix& truth);

/// Post-threshold combined binary adjacency of a fit.
IntMatrix predicted_combined(const FitResult& result);

/// med_(i,j) Corr(P_N(i,j), |Cov_hat|_N(i,j)); undefined correlations
/// contribute 0.
double rho_cons_diagnostic(const PriorMatrix& prior, const TimeSeriesData& data);

MetricsReport score_fit(const FitResult& result, const GroundTruth& truth,
                        const PriorMatrix& prior, const TimeSeriesData& data);

}  // namespace prcd
