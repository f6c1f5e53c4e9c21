#pragma once

#include <string>

#include "prcd/types.hpp"

namespace prcd {

// Datasets: CSV with one row per time step, header v0..v{d-1}. Values are
// written with 17 significant digits so round trips are lossless.
void save_timeseries_csv(const TimeSeriesData& data, const std::string& path);
TimeSeriesData load_timeseries_csv(const std::string& path, int lag_order);

// Ground truth: JSON with per-lag adjacency and weights.
void save_truth_json(const GroundTruth& truth, const std::string& path);
GroundTruth load_truth_json(const std::string& path);

// Prior: d x d CSV of reals, or JSON {"d": int, "values": row-major array}.
// Loading clips entries into [0,1], zeroes the diagonal, and sets provenance
// to the filename. expected_d < 0 skips the dimension check.
void save_prior_csv(const PriorMatrix& prior, const std::string& path);
void save_prior_json(const PriorMatrix& prior, const std::string& path);
PriorMatrix load_prior(const std::string& path, int expected_d = -1);

void save_fit_result_json(const FitResult& result, const std::string& path);

std::string format_g17(double v);

}  // namespace prcd
