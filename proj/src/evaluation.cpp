#include "prcd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "prcd/prior.hpp"

namespace prcd {

ScoredGraph combine_scores(const FitResult& result, const GroundTruth& truth) {
  const int d = result.weights_raw.dim();
  ScoredGraph out;
  out.scores = Matrix::Zero(d, d);
  for (const Matrix& wk : result.weights_raw.w)
    out.scores = out.scores.cwiseMax(wk.cwiseAbs());
  out.scores.diagonal().setZero();
  out.truth = truth.combined;
  out.truth.diagonal().setZero();
  return out;
}

namespace {

void collect(const ScoredGraph& scored, std::vector<double>& s, std::vector<int>& y) {
  const int d = static_cast<int>(scored.scores.rows());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) {
        s.push_back(scored.scores(i, j));
        y.push_back(scored.truth(i, j) != 0 ? 1 : 0);
      }
}

}  // namespace

double auroc(const ScoredGraph& scored) {
  std::vector<double> s;
  std::vector<int> y;
  collect(scored, s, y);
  const int n = static_cast<int>(s.size());
  long np = std::count(y.begin(), y.end(), 1);
  long nn = n - np;
  if (np == 0 || nn == 0)
    throw UndefinedMetricError("auroc: truth needs at least one positive and one negative");

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int l, int r) { return s[static_cast<size_t>(l)] < s[static_cast<size_t>(r)]; });
  // rank-sum with average ranks on ties
  double rank_pos = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n &&
           s[static_cast<size_t>(idx[static_cast<size_t>(j + 1)])] ==
               s[static_cast<size_t>(idx[static_cast<size_t>(i)])])
      ++j;
    double avg_rank = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t)
      if (y[static_cast<size_t>(idx[static_cast<size_t>(t)])] == 1) rank_pos += avg_rank;
    i = j + 1;
  }
  double u = rank_pos - 0.5 * static_cast<double>(np) * (np + 1);
  return u / (static_cast<double>(np) * static_cast<double>(nn));
}

BestF1 best_f1(const ScoredGraph& scored) {
  std::vector<double> s;
  std::vector<int> y;
  collect(scored, s, y);
  const int n = static_cast<int>(s.size());
  long np = std::count(y.begin(), y.end(), 1);
  if (np == 0 || np == n)
    throw UndefinedMetricError("best_f1: truth needs at least one positive and one negative");

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](int l, int r) { return s[static_cast<size_t>(l)] < s[static_cast<size_t>(r)]; });

  // Descending threshold sweep over unique scores; predictions are score >=
  // threshold, so at each unique value the cumulative counts give P and R.
  BestF1 best{0.0, std::numeric_limits<double>::infinity()};  // +inf: empty prediction, F1 = 0
  long tp = 0, fp = 0;
  int i = n - 1;
  while (i >= 0) {
    int j = i;
    double val = s[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    while (j - 1 >= 0 && s[static_cast<size_t>(idx[static_cast<size_t>(j - 1)])] == val) --j;
    for (int t = j; t <= i; ++t) {
      if (y[static_cast<size_t>(idx[static_cast<size_t>(t)])] == 1)
        ++tp;
      else
        ++fp;
    }
    double denom = 2.0 * tp + fp + (np - tp);
    double f1 = denom > 0 ? 2.0 * tp / denom : 0.0;
    if (f1 > best.f1 || (f1 == best.f1 && val < best.threshold)) best = {f1, val};
    i = j - 1;
  }
  return best;
}

int shd(const IntMatrix& predicted, const IntMatrix& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
    throw DimensionError("shd: shape mismatch");
  int count = 0;
  for (int i = 0; i < predicted.rows(); ++i)
    for (int j = 0; j < predicted.cols(); ++j)
      if (i != j && ((predicted(i, j) != 0) != (truth(i, j) != 0))) ++count;
  return count;
}

IntMatrix predicted_combined(const FitResult& result) {
  const int d = result.weights.dim();
  IntMatrix c = IntMatrix::Zero(d, d);
  for (const Matrix& wk : result.weights.w)
    c = (c.array() != 0 || wk.array() != 0.0).cast<int>();
  c.diagonal().setZero();
  return c;
}

double rho_cons_diagnostic(const PriorMatrix& prior, const TimeSeriesData& data) {
  const int d = prior.dim();
  if (d < 4) throw ParameterError("rho_cons_diagnostic: need d >= 4");
  if (data.dim() != d) throw DimensionError("rho_cons_diagnostic: prior/data dimension");

  Matrix centered = data.observations.rowwise() - data.observations.colwise().mean();
  Matrix cov = (centered.transpose() * centered) / std::max(1, data.rows() - 1);
  Matrix acov = cov.cwiseAbs();
  const Matrix& p = prior.values;

  auto pearson = [](const std::vector<double>& a, const std::vector<double>& b) {
    const int n = static_cast<int>(a.size());
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, sa = 0, sb = 0;
    for (int t = 0; t < n; ++t) {
      double da = a[static_cast<size_t>(t)] - ma, db = b[static_cast<size_t>(t)] - mb;
      sab += da * db;
      sa += da * da;
      sb += db * db;
    }
    if (sa < 1e-24 || sb < 1e-24) return 0.0;  // constant vector: undefined -> 0
    return sab / std::sqrt(sa * sb);
  };

  std::vector<double> medians;
  medians.reserve(static_cast<size_t>(d) * (d - 1));
  std::vector<double> pv, cv;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      pv.clear();
      cv.clear();
      for (int k = 0; k < d; ++k)
        if (k != i && k != j) {
          pv.push_back(p(k, j));
          cv.push_back(acov(k, j));
        }
      for (int l = 0; l < d; ++l)
        if (l != j && l != i) {
          pv.push_back(p(i, l));
          cv.push_back(acov(i, l));
        }
      medians.push_back(pearson(pv, cv));
    }
  std::nth_element(medians.begin(), medians.begin() + medians.size() / 2, medians.end());
  double hi = medians[medians.size() / 2];
  if (medians.size() % 2 == 0) {
    double lo = *std::max_element(medians.begin(), medians.begin() + medians.size() / 2);
    return 0.5 * (lo + hi);
  }
  return hi;
}

MetricsReport score_fit(const FitResult& result, const GroundTruth& truth,
                        const PriorMatrix& prior, const TimeSeriesData& data) {
  MetricsReport r;
  ScoredGraph scored = combine_scores(result, truth);
  r.auroc = auroc(scored);
  BestF1 f = best_f1(scored);
  r.best_f1 = f.f1;
  r.best_f1_threshold = f.threshold;
  r.shd = shd(predicted_combined(result), scored.truth);
  r.tau_mean = offdiag_mean(result.tau_realized);
  r.prior_agreement = prior_agreement_rate(prior, scored.truth);
  r.rho_cons = rho_cons_diagnostic(prior, data);
  return r;
}

}  // namespace prcd
