#pragma once

#include <cstdint>
#include <string>

#include "prcd/types.hpp"

namespace prcd {

PriorMatrix make_prior(const GroundTruth& truth, const CorruptionSpec& spec, uint64_t rng_seed);

/// Quantile grouping of the off-diagonal prior entries. Returns a d x d matrix
/// of group ids in 0..G-1 with -1 on the diagonal. Equal values share the
/// lower group; an all-equal prior collapses to group 0.
IntMatrix group_edges_by_quantile(const PriorMatrix& prior, int G);

/// Off-diagonal sign-agreement rate: fraction of entries with (P>0.5) == (A*==1).
double prior_agreement_rate(const PriorMatrix& prior, const IntMatrix& truth_combined);

}  // namespace prcd
