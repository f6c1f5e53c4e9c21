#include "prcd/datagen.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prcd {

namespace {

double draw_signed_weight(std::mt19937_64& rng, const WeightRange& range) {
  std::uniform_real_distribution<double> mag(range.lo, range.hi);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  double w = mag(rng);
  return coin(rng) < 0.5 ? -w : w;
}

GroundTruth truth_from_instantaneous(const IntMatrix& adj, const Matrix& w0) {
  GroundTruth t;
  t.adjacency_per_lag = {adj};
  t.combined = adj;
  t.weights.w = {w0};
  return t;
}

}  // namespace

Matrix standardize(const Matrix& x) {
  const int T = static_cast<int>(x.rows());
  Matrix out = x;
  for (int j = 0; j < x.cols(); ++j) {
    double mean = x.col(j).mean();
    out.col(j).array() -= mean;
    double var = out.col(j).squaredNorm() / std::max(1, T - 1);
    double sd = std::sqrt(var);
    if (sd > 1e-12) out.col(j) /= sd;
  }
  return out;
}

bool has_cycle(const IntMatrix& adjacency) {
  const int d = static_cast<int>(adjacency.rows());
  std::vector<int> color(d, 0);  // 0 white, 1 on stack, 2 done
  std::vector<int> node_stack, edge_stack;
  for (int s = 0; s < d; ++s) {
    if (color[s] != 0) continue;
    node_stack = {s};
    edge_stack = {0};
    color[s] = 1;
    while (!node_stack.empty()) {
      int u = node_stack.back();
      int j = edge_stack.back();
      bool advanced = false;
      for (; j < d; ++j) {
        if (adjacency(u, j) == 0) continue;
        if (color[j] == 1) return true;
        if (color[j] == 0) {
          edge_stack.back() = j + 1;
          color[j] = 1;
          node_stack.push_back(j);
          edge_stack.push_back(0);
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        color[u] = 2;
        node_stack.pop_back();
        edge_stack.pop_back();
      }
    }
  }
  return false;
}

std::vector<int> topological_order(const IntMatrix& adjacency) {
  const int d = static_cast<int>(adjacency.rows());
  std::vector<int> indeg(d, 0);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i != j && adjacency(i, j) != 0) ++indeg[j];
  std::vector<int> order;
  order.reserve(d);
  std::vector<int> ready;
  for (int j = 0; j < d; ++j)
    if (indeg[j] == 0) ready.push_back(j);
  while (!ready.empty()) {
    int u = ready.back();
    ready.pop_back();
    order.push_back(u);
    for (int j = 0; j < d; ++j) {
      if (j != u && adjacency(u, j) != 0 && --indeg[j] == 0) ready.push_back(j);
    }
  }
  if (static_cast<int>(order.size()) != d) throw ParameterError("adjacency contains a cycle");
  return order;
}

GroundTruth generate_er_dag(int d, double edge_prob, WeightRange range, uint64_t rng_seed) {
  if (d < 2) throw ParameterError("generate_er_dag: d must be >= 2");
  if (!(edge_prob >= 0.0 && edge_prob < 1.0))
    throw ParameterError("generate_er_dag: edge_prob must lie in [0,1)");
  std::mt19937_64 rng(rng_seed);
  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  IntMatrix adj = IntMatrix::Zero(d, d);
  Matrix w0 = Matrix::Zero(d, d);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  // Edges only from earlier to later in the permutation order: acyclic by
  // construction.
  for (int a = 0; a < d; ++a) {
    for (int b = a + 1; b < d; ++b) {
      if (coin(rng) < edge_prob) {
        int i = perm[a], j = perm[b];
        adj(i, j) = 1;
        w0(i, j) = draw_signed_weight(rng, range);
      }
    }
  }
  return truth_from_instantaneous(adj, w0);
}

GroundTruth generate_ba_graph(int d, int m, uint64_t rng_seed) {
  if (m < 1 || d <= m) throw ParameterError("generate_ba_graph: need d > m >= 1");
  std::mt19937_64 rng(rng_seed);
  IntMatrix adj = IntMatrix::Zero(d, d);
  Matrix w0 = Matrix::Zero(d, d);

  // Preferential attachment with a degree-repeated target pool; the first new
  // node attaches to all m seed nodes. Orientation old -> new keeps it a DAG.
  std::vector<int> repeated;
  std::vector<int> targets(m);
  std::iota(targets.begin(), targets.end(), 0);
  for (int v = m; v < d; ++v) {
    for (int t : targets) {
      adj(t, v) = 1;
      w0(t, v) = draw_signed_weight(rng, WeightRange{});
      repeated.push_back(t);
      repeated.push_back(v);
    }
    if (v + 1 < d) {
      std::uniform_int_distribution<size_t> pick(0, repeated.size() - 1);
      std::vector<int> next;
      while (static_cast<int>(next.size()) < m) {
        int cand = repeated[pick(rng)];
        if (std::find(next.begin(), next.end(), cand) == next.end()) next.push_back(cand);
      }
      targets = next;
    }
  }
  return truth_from_instantaneous(adj, w0);
}

double companion_spectral_radius(const WeightStack& weights) {
  const int d = weights.dim();
  const int K = weights.lag_order();
  if (K < 1) return 0.0;
  Matrix w0t = weights.instantaneous_masked().transpose();
  Matrix lhs = Matrix::Identity(d, d) - w0t;
  Eigen::PartialPivLU<Matrix> lu(lhs);
  if (std::abs(lu.determinant()) < 1e-12)
    throw InstabilityError("companion_spectral_radius: (I - W0^T) is singular");
  Matrix comp = Matrix::Zero(K * d, K * d);
  for (int k = 1; k <= K; ++k)
    comp.block(0, (k - 1) * d, d, d) = lu.solve(weights.w[static_cast<size_t>(k)].transpose());
  for (int k = 1; k < K; ++k)
    comp.block(k * d, (k - 1) * d, d, d) = Matrix::Identity(d, d);
  Eigen::EigenSolver<Matrix> es(comp, /*computeEigenvectors=*/false);
  return es.eigenvalues().array().abs().maxCoeff();
}

WeightStack generate_lag_matrices(const GroundTruth& truth, int K, double density,
                                  double spectral_cap, uint64_t rng_seed, WeightRange range) {
  if (K < 1) throw ParameterError("generate_lag_matrices: K must be >= 1");
  if (!(spectral_cap > 0.0 && spectral_cap < 1.0))
    throw ParameterError("generate_lag_matrices: spectral_cap must lie in (0,1)");
  const int d = truth.dim();
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  WeightStack stack(K, d);
  stack.w[0] = truth.weights.w.at(0);
  for (int k = 1; k <= K; ++k) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (coin(rng) < density) stack.w[static_cast<size_t>(k)](i, j) = draw_signed_weight(rng, range);
  }

  // Rescale all lag matrices until the companion radius is within the cap.
  // One pass is exact for K=1 (the map is linear in W_1).
  for (int pass = 0; pass < 50; ++pass) {
    double radius = companion_spectral_radius(stack);
    if (radius <= spectral_cap * (1.0 + 1e-12)) break;
    double scale = spectral_cap / radius;
    for (int k = 1; k <= K; ++k) stack.w[static_cast<size_t>(k)] *= scale;
  }
  return stack;
}

TimeSeriesData simulate_svar(const WeightStack& weights, int T, const NoiseSpec& noise,
                             Mechanism mechanism, uint64_t rng_seed) {
  const int d = weights.dim();
  const int K = weights.lag_order();
  if (T < K + 2) throw ParameterError("simulate_svar: need T >= K+2");
  std::mt19937_64 rng(rng_seed);

  const Matrix w0 = weights.instantaneous_masked();
  IntMatrix adj0 = IntMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && w0(i, j) != 0.0) adj0(i, j) = 1;
  const std::vector<int> order = topological_order(adj0);

  // Per-edge tanh-mechanism coefficients, drawn up front on the instantaneous
  // support (row-major), so the noise stream below is mechanism-independent.
  Matrix ta, tb, tc;
  if (mechanism == Mechanism::TanhNonlinear) {
    ta = Matrix::Zero(d, d);
    tb = Matrix::Zero(d, d);
    tc = Matrix::Zero(d, d);
    std::uniform_real_distribution<double> bdist(0.5, 2.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (adj0(i, j)) {
          ta(i, j) = draw_signed_weight(rng, WeightRange{});
          tb(i, j) = bdist(rng);
          tc(i, j) = draw_signed_weight(rng, WeightRange{});
          // cap the mechanism's slope |a|b + |c| like the linear weight range,
          // else instantaneous fan-out chains blow up on hub-heavy graphs
          double slope = std::abs(ta(i, j)) * tb(i, j) + std::abs(tc(i, j));
          if (slope > 0.9) {
            ta(i, j) *= 0.9 / slope;
            tc(i, j) *= 0.9 / slope;
          }
        }
  }

  Vector scales;
  if (noise.family == NoiseSpec::Family::Heteroscedastic) {
    if (noise.per_variable_scales) {
      scales = *noise.per_variable_scales;
      if (scales.size() != d) throw DimensionError("simulate_svar: per_variable_scales size");
    } else {
      scales.resize(d);
      std::uniform_real_distribution<double> sdist(0.5, 1.5);
      for (int j = 0; j < d; ++j) scales(j) = sdist(rng);
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::student_t_distribution<double> tdist(noise.degrees_of_freedom);
  const double nu = noise.degrees_of_freedom;
  const double t_scale = std::sqrt((nu - 2.0) / nu);
  const double laplace_b = 1.0 / std::sqrt(2.0);

  auto draw_noise = [&](int j) -> double {
    switch (noise.family) {
      case NoiseSpec::Family::Gaussian:
        return gauss(rng);
      case NoiseSpec::Family::Laplace: {
        double u = unif(rng) - 0.5;
        return -laplace_b * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
      }
      case NoiseSpec::Family::StudentT:
        return t_scale * tdist(rng);
      case NoiseSpec::Family::Heteroscedastic:
        return scales(j) * gauss(rng);
    }
    return 0.0;
  };

  const int burn_in = 100;
  const int total = T + burn_in;
  Matrix x = Matrix::Zero(total + K, d);  // first K rows: zero history
  Vector eps(d), xt(d);
  for (int t = K; t < total + K; ++t) {
    for (int j = 0; j < d; ++j) eps(j) = draw_noise(j);
    Vector lag_part = Vector::Zero(d);
    for (int k = 1; k <= K; ++k)
      lag_part.noalias() += weights.w[static_cast<size_t>(k)].transpose() * x.row(t - k).transpose();
    xt.setZero();
    for (int j : order) {
      double v = lag_part(j) + eps(j);
      if (mechanism == Mechanism::Linear) {
        for (int i = 0; i < d; ++i)
          if (adj0(i, j)) v += w0(i, j) * xt(i);
      } else {
        for (int i = 0; i < d; ++i)
          if (adj0(i, j)) v += ta(i, j) * std::tanh(tb(i, j) * xt(i)) + tc(i, j) * xt(i);
      }
      if (!std::isfinite(v) || std::abs(v) > 1e8)
        throw InstabilityError("simulate_svar: unstable trajectory (seed " +
                               std::to_string(rng_seed) + ")");
      xt(j) = v;
    }
    x.row(t) = xt.transpose();
  }

  TimeSeriesData out;
  out.lag_order = K;
  out.observations = standardize(x.bottomRows(T));
  return out;
}

std::pair<TimeSeriesData, GroundTruth> simulate_lorenz96(int d, int T, double forcing, double dt,
                                                         uint64_t rng_seed) {
  if (d < 4) throw ParameterError("simulate_lorenz96: need d >= 4");
  if (T < 3) throw ParameterError("simulate_lorenz96: need T >= 3");
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector x(d);
  for (int i = 0; i < d; ++i) x(i) = forcing * (1.0 + 0.01 * gauss(rng));

  auto deriv = [&](const Vector& s) {
    Vector dx(d);
    for (int i = 0; i < d; ++i) {
      dx(i) = (s((i + 1) % d) - s((i - 2 + d) % d)) * s((i - 1 + d) % d) - s(i) + forcing;
    }
    return dx;
  };

  const int burn_in = 100;
  Matrix traj(T, d);
  for (int step = 0; step < burn_in + T; ++step) {
    Vector k1 = deriv(x);
    Vector k2 = deriv(x + 0.5 * dt * k1);
    Vector k3 = deriv(x + 0.5 * dt * k2);
    Vector k4 = deriv(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || x.array().abs().maxCoeff() > 1e6)
      throw InstabilityError("simulate_lorenz96: diverged (seed " + std::to_string(rng_seed) + ")");
    if (step >= burn_in) traj.row(step - burn_in) = x.transpose();
  }

  GroundTruth truth;
  IntMatrix lag0 = IntMatrix::Zero(d, d);
  IntMatrix lag1 = IntMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    lag1((i - 2 + d) % d, i) = 1;
    lag1((i - 1 + d) % d, i) = 1;
    lag1((i + 1) % d, i) = 1;
    lag1(i, i) = 1;
  }
  truth.adjacency_per_lag = {lag0, lag1};
  truth.combined = combined_adjacency(truth.adjacency_per_lag);
  truth.weights = WeightStack(1, d);
  truth.weights.w[1] = lag1.cast<double>();

  TimeSeriesData data;
  data.lag_order = 1;  // harness default for L-96 fits
  data.observations = standardize(traj);
  return {data, truth};
}

IntMatrix combined_adjacency(const std::vector<IntMatrix>& per_lag) {
  IntMatrix combined = per_lag.at(0);
  for (size_t k = 1; k < per_lag.size(); ++k)
    combined = (combined.array() != 0 || per_lag[k].array() != 0).cast<int>();
  return combined;
}

std::pair<TimeSeriesData, TimeSeriesData> split_chronological(const TimeSeriesData& data) {
  const int T = data.rows();
  const int K = data.lag_order;
  if (T < 2 * (K + 2)) throw SplitError("split_chronological: need T >= 2(K+2)");
  const int half = T / 2;
  TimeSeriesData a{data.observations.topRows(half), K};
  TimeSeriesData b{data.observations.bottomRows(T - half), K};
  return {a, b};
}

}  // namespace prcd
