#pragma once

#include <cstdint>
#include <utility>

#include "prcd/types.hpp"

namespace prcd {

/// Magnitude interval for coefficient draws; the sign is a fair coin, so the
/// support is [-hi,-lo] U [lo,hi].
struct WeightRange {
  double lo = 0.3;
  double hi = 0.8;
};

/// Column-standardize: zero mean, unit sample std per column. Columns with
/// (near-)zero variance are centered but left unscaled.
Matrix standardize(const Matrix& x);

/// Depth-first cycle search on the support digraph (entry (i,j) = edge i->j).
bool has_cycle(const IntMatrix& adjacency);

/// Topological order of a DAG adjacency; throws ParameterError on a cycle.
std::vector<int> topological_order(const IntMatrix& adjacency);

GroundTruth generate_er_dag(int d, double edge_prob, WeightRange range, uint64_t rng_seed);

GroundTruth generate_ba_graph(int d, int m, uint64_t rng_seed);

/// Fill lags 1..K on top of truth's instantaneous weights; the companion-form
/// reduced transition is rescaled to spectral radius <= spectral_cap.
WeightStack generate_lag_matrices(const GroundTruth& truth, int K, double density,
                                  double spectral_cap, uint64_t rng_seed,
                                  WeightRange range = WeightRange{});

TimeSeriesData simulate_svar(const WeightStack& weights, int T, const NoiseSpec& noise,
                             Mechanism mechanism, uint64_t rng_seed);

std::pair<TimeSeriesData, GroundTruth> simulate_lorenz96(int d, int T, double forcing, double dt,
                                                         uint64_t rng_seed);

/// Combined adjacency (entrywise OR across lags) from a weight stack support.
IntMatrix combined_adjacency(const std::vector<IntMatrix>& per_lag);

/// Data-level spectral radius of the companion transition implied by weights.
double companion_spectral_radius(const WeightStack& weights);

/// Chronological halves (first gets floor(T/2) rows). Throws SplitError when a
/// half would be shorter than K+2.
std::pair<TimeSeriesData, TimeSeriesData> split_chronological(const TimeSeriesData& data);

}  // namespace prcd
