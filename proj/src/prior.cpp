#include "prcd/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prcd {

namespace {

void validate(const CorruptionSpec& spec, int d) {
  auto in_unit = [](double a) { return a >= 0.0 && a <= 1.0; };
  if (spec.mode == CorruptionSpec::Mode::HubPeripheral) {
    if (!in_unit(spec.acc_hub) || !in_unit(spec.acc_periph))
      throw ParameterError("make_prior: hub/peripheral accuracies must lie in [0,1]");
    if (spec.hub_count < 1 || spec.hub_count >= d)
      throw ParameterError("make_prior: hub_count must lie in [1, d)");
  } else if (!in_unit(spec.accuracy)) {
    throw ParameterError("make_prior: accuracy must lie in [0,1]");
  }
}

}  // namespace

PriorMatrix make_prior(const GroundTruth& truth, const CorruptionSpec& spec, uint64_t rng_seed) {
  const int d = truth.dim();
  validate(spec, d);
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> high(0.8, 0.99);
  std::uniform_real_distribution<double> low(0.01, 0.2);
  const IntMatrix& a = truth.combined;

  Matrix p = Matrix::Zero(d, d);

  if (spec.mode == CorruptionSpec::Mode::Adversarial) {
    // Truth-consistent soft values first; the corruption budget is then spent
    // on true edges first with near-exact inversion (P = 1 - A*, softened to
    // stay inside (0,1)), which maximizes Frobenius damage for the budget.
    std::uniform_real_distribution<double> inv_low(0.01, 0.05);
    std::uniform_real_distribution<double> inv_high(0.95, 0.99);
    std::vector<std::pair<int, int>> edges, nonedges;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        p(i, j) = a(i, j) ? high(rng) : low(rng);
        (a(i, j) ? edges : nonedges).emplace_back(i, j);
      }
    long budget = std::lround((1.0 - spec.accuracy) * static_cast<double>(d) * (d - 1));
    std::shuffle(edges.begin(), edges.end(), rng);
    std::shuffle(nonedges.begin(), nonedges.end(), rng);
    edges.insert(edges.end(), nonedges.begin(), nonedges.end());
    for (long n = 0; n < budget && n < static_cast<long>(edges.size()); ++n) {
      auto [i, j] = edges[static_cast<size_t>(n)];
      p(i, j) = a(i, j) ? inv_low(rng) : inv_high(rng);
    }
  } else {
    std::vector<char> is_hub;
    if (spec.mode == CorruptionSpec::Mode::HubPeripheral) {
      std::vector<std::pair<int, int>> deg(d);  // (degree, node), ties to lower index
      for (int v = 0; v < d; ++v) {
        int g = 0;
        for (int u = 0; u < d; ++u)
          if (u != v) g += (a(u, v) != 0) + (a(v, u) != 0);
        deg[v] = {g, v};
      }
      std::sort(deg.begin(), deg.end(), [](auto& l, auto& r) {
        return l.first != r.first ? l.first > r.first : l.second < r.second;
      });
      is_hub.assign(d, 0);
      for (int h = 0; h < spec.hub_count; ++h) is_hub[static_cast<size_t>(deg[h].second)] = 1;
    }

    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        if (i == j) continue;
        double acc = spec.accuracy;
        if (spec.mode == CorruptionSpec::Mode::HubPeripheral)
          acc = (is_hub[i] || is_hub[j]) ? spec.acc_hub : spec.acc_periph;
        bool correct = coin(rng) < acc;
        bool edge = a(i, j) != 0;
        if (spec.mode == CorruptionSpec::Mode::Systematic && !correct) {
          p(i, j) = high(rng);  // over-connectivity bias
        } else {
          bool soft_high = correct == edge;
          p(i, j) = soft_high ? high(rng) : low(rng);
        }
      }
  }

  PriorMatrix out;
  out.values = p;
  switch (spec.mode) {
    case CorruptionSpec::Mode::Random: out.provenance = "random"; break;
    case CorruptionSpec::Mode::Systematic: out.provenance = "systematic"; break;
    case CorruptionSpec::Mode::Adversarial: out.provenance = "adversarial"; break;
    case CorruptionSpec::Mode::HubPeripheral: out.provenance = "hub_peripheral"; break;
  }
  return out;
}

IntMatrix group_edges_by_quantile(const PriorMatrix& prior, int G) {
  const int d = prior.dim();
  const int n = d * (d - 1);
  if (G < 1) throw ParameterError("group_edges_by_quantile: G must be >= 1");
  if (n < G) throw ParameterError("group_edges_by_quantile: fewer edges than groups");

  struct Entry {
    double v;
    int i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<size_t>(n));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) entries.push_back({prior.values(i, j), i, j});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& l, const Entry& r) { return l.v < r.v; });

  IntMatrix groups = IntMatrix::Constant(d, d, -1);
  int prev_group = 0;
  for (int r = 0; r < n; ++r) {
    int g = static_cast<int>((static_cast<long>(r) * G) / n);
    // ties stay in the lower group
    if (r > 0 && entries[static_cast<size_t>(r)].v == entries[static_cast<size_t>(r - 1)].v)
      g = prev_group;
    groups(entries[static_cast<size_t>(r)].i, entries[static_cast<size_t>(r)].j) = g;
    prev_group = g;
  }
  return groups;
}

double prior_agreement_rate(const PriorMatrix& prior, const IntMatrix& truth_combined) {
  const int d = prior.dim();
  int agree = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && ((prior.values(i, j) > 0.5) == (truth_combined(i, j) != 0))) ++agree;
  return static_cast<double>(agree) / (static_cast<double>(d) * (d - 1));
}

}  // namespace prcd
