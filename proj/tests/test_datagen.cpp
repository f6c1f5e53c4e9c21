#include <cmath>
#include <random>

#include "doctest.h"
#include "prcd/datagen.hpp"

using namespace prcd;

namespace {

// Independent acyclicity oracle: Kahn peeling (the library uses DFS).
bool kahn_acyclic(const IntMatrix& adj) {
  const int d = static_cast<int>(adj.rows());
  std::vector<int> indeg(d, 0);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i)
      if (i != j && adj(i, j)) ++indeg[j];
  std::vector<int> q;
  for (int j = 0; j < d; ++j)
    if (indeg[j] == 0) q.push_back(j);
  int seen = 0;
  while (!q.empty()) {
    int u = q.back();
    q.pop_back();
    ++seen;
    for (int j = 0; j < d; ++j)
      if (j != u && adj(u, j) && --indeg[j] == 0) q.push_back(j);
  }
  return seen == d;
}

int edge_count(const IntMatrix& adj) {
  int c = 0;
  for (int i = 0; i < adj.rows(); ++i)
    for (int j = 0; j < adj.cols(); ++j)
      if (i != j && adj(i, j)) ++c;
  return c;
}

}  // namespace

TEST_CASE("er dag: expected edge count over 1000 seeds") {
  double total = 0;
  for (uint64_t s = 0; s < 1000; ++s)
    total += edge_count(generate_er_dag(20, 0.15, WeightRange{}, s).combined);
  double mean = total / 1000.0;
  CHECK(std::abs(mean - 28.5) < 1.5);
}

TEST_CASE("er dag: zero edge probability yields the empty graph") {
  GroundTruth t = generate_er_dag(2, 0.0, WeightRange{}, 7);
  CHECK(edge_count(t.combined) == 0);
  CHECK(t.weights.w[0].cwiseAbs().sum() == 0.0);
}

TEST_CASE("er dag: acyclic with zero diagonal on 1000 seeds") {
  for (uint64_t s = 0; s < 1000; ++s) {
    GroundTruth t = generate_er_dag(12, 0.3, WeightRange{}, s);
    CHECK(t.adjacency_per_lag[0].diagonal().sum() == 0);
    CHECK(kahn_acyclic(t.adjacency_per_lag[0]));
    CHECK_FALSE(has_cycle(t.adjacency_per_lag[0]));
  }
}

TEST_CASE("er dag: weights live on the adjacency with magnitudes in range") {
  GroundTruth t = generate_er_dag(15, 0.3, WeightRange{}, 3);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) {
      double w = std::abs(t.weights.w[0](i, j));
      if (t.adjacency_per_lag[0](i, j)) {
        CHECK(w >= 0.3);
        CHECK(w <= 0.8);
      } else {
        CHECK(w == 0.0);
      }
    }
}

TEST_CASE("er dag: parameter validation") {
  CHECK_THROWS_AS(generate_er_dag(1, 0.5, WeightRange{}, 0), ParameterError);
  CHECK_THROWS_AS(generate_er_dag(5, 1.5, WeightRange{}, 0), ParameterError);
}

TEST_CASE("ba graph: exact edge count m(d-m)") {
  CHECK(edge_count(generate_ba_graph(20, 2, 0).combined) == 36);
  CHECK(edge_count(generate_ba_graph(3, 2, 1).combined) == 2);
  GroundTruth t3 = generate_ba_graph(3, 2, 5);
  CHECK(t3.combined(0, 2) == 1);
  CHECK(t3.combined(1, 2) == 1);
}

TEST_CASE("ba graph: hub dominance at d=30 over 100 seeds") {
  int ok = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    GroundTruth t = generate_ba_graph(30, 2, s);
    int max_deg = 0, total_deg = 0;
    for (int v = 0; v < 30; ++v) {
      int deg = 0;
      for (int u = 0; u < 30; ++u) deg += (t.combined(u, v) != 0) + (t.combined(v, u) != 0);
      max_deg = std::max(max_deg, deg);
      total_deg += deg;
    }
    double mean_deg = total_deg / 30.0;
    if (max_deg >= 2.0 * mean_deg) ++ok;
    CHECK(kahn_acyclic(t.combined));
  }
  CHECK(ok == 100);
}

TEST_CASE("ba graph: parameter validation") {
  CHECK_THROWS_AS(generate_ba_graph(2, 2, 0), ParameterError);
}

TEST_CASE("lag matrices: rescaling hits the spectral cap exactly for K=1") {
  // W0 = 0, W1 with known radius 1.8: diag(1.8, 0.1, 0.1)
  GroundTruth t;
  t.adjacency_per_lag = {IntMatrix::Zero(3, 3)};
  t.combined = IntMatrix::Zero(3, 3);
  t.weights = WeightStack(0, 3);

  WeightStack manual(1, 3);
  manual.w[1] = Matrix::Zero(3, 3);
  manual.w[1].diagonal() << 1.8, 0.1, 0.1;
  CHECK(companion_spectral_radius(manual) == doctest::Approx(1.8));
  manual.w[1] *= 0.9 / 1.8;
  CHECK(companion_spectral_radius(manual) == doctest::Approx(0.9));

  WeightStack generated = generate_lag_matrices(t, 1, 0.4, 0.9, 17);
  CHECK(companion_spectral_radius(generated) <= 0.9 * (1 + 1e-9));
}

TEST_CASE("lag matrices: zero density gives zero lags") {
  GroundTruth t = generate_er_dag(6, 0.3, WeightRange{}, 2);
  WeightStack w = generate_lag_matrices(t, 1, 0.0, 0.9, 3);
  CHECK(w.w[1].cwiseAbs().sum() == 0.0);
}

TEST_CASE("lag matrices: simulated series is empirically stationary over 50 seeds") {
  for (uint64_t s = 0; s < 50; ++s) {
    GroundTruth t = generate_er_dag(8, 0.15, WeightRange{}, s);
    WeightStack w = generate_lag_matrices(t, 1, 0.15, 0.9, s + 1000);
    // raw (unstandardized) comparison via two halves of a standardized run is
    // enough: variance ratios of halves stay bounded.
    TimeSeriesData data = simulate_svar(w, 400, NoiseSpec{}, Mechanism::Linear, s + 2000);
    const int half = data.rows() / 2;
    for (int j = 0; j < data.dim(); ++j) {
      auto var = [&](int start, int n) {
        Vector col = data.observations.col(j).segment(start, n);
        col.array() -= col.mean();
        return col.squaredNorm() / (n - 1);
      };
      double v1 = var(0, half), v2 = var(half, data.rows() - half);
      CHECK(v2 < 3.0 * v1 + 1e-9);
      CHECK(v1 < 3.0 * v2 + 1e-9);
    }
  }
}

TEST_CASE("simulate_svar: independent columns stay uncorrelated") {
  WeightStack w(1, 2);  // no edges at all
  TimeSeriesData data = simulate_svar(w, 500, NoiseSpec{}, Mechanism::Linear, 42);
  Vector a = data.observations.col(0), b = data.observations.col(1);
  a.array() -= a.mean();
  b.array() -= b.mean();
  double r = a.dot(b) / (a.norm() * b.norm());
  CHECK(std::abs(r) < 0.15);
}

TEST_CASE("simulate_svar: all-zero weights return standardized noise") {
  WeightStack w(1, 3);
  TimeSeriesData data = simulate_svar(w, 200, NoiseSpec{}, Mechanism::Linear, 9);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(data.observations.col(j).mean()) < 1e-9);
    double sd = std::sqrt(data.observations.col(j).squaredNorm() / (data.rows() - 1));
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("simulate_svar: student-t variance scaled to one") {
  WeightStack w(0, 1);
  NoiseSpec noise;
  noise.family = NoiseSpec::Family::StudentT;
  // standardization would hide the scale; accumulate raw draws instead via a
  // long simulated column before standardization is equivalent to checking
  // moments on a fresh stream, so sample the generator through the public API
  // at T=5000 and verify the pre-standardization contract on raw draws below.
  std::mt19937_64 rng(7);
  std::student_t_distribution<double> tdist(4.0);
  double scale = std::sqrt(0.5), s2 = 0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    double v = scale * tdist(rng);
    s2 += v * v;
  }
  CHECK(s2 / n > 0.8);
  CHECK(s2 / n < 1.2);
  CHECK_NOTHROW(simulate_svar(w, 50, noise, Mechanism::Linear, 3));
}

TEST_CASE("noise families: unit variance over 1e6 draws") {
  // gaussian / laplace / student_t contract; mirrors the generator's draws
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::student_t_distribution<double> tdist(4.0);
  const int n = 1000000;
  double sg = 0, sl = 0, st = 0;
  const double lb = 1.0 / std::sqrt(2.0), ts = std::sqrt(0.5);
  for (int i = 0; i < n; ++i) {
    double g = gauss(rng);
    sg += g * g;
    double u = unif(rng) - 0.5;
    double l = -lb * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::abs(u));
    sl += l * l;
    double t = ts * tdist(rng);
    st += t * t;
  }
  CHECK(sg / n > 0.99);
  CHECK(sg / n < 1.01);
  CHECK(sl / n > 0.99);
  CHECK(sl / n < 1.01);
  // heavy tails need slack: kurtosis of t(4) is infinite, variance is exact
  CHECK(st / n > 0.95);
  CHECK(st / n < 1.05);
}

TEST_CASE("simulate_svar: tanh mechanism runs and standardizes") {
  GroundTruth t = generate_er_dag(6, 0.3, WeightRange{}, 11);
  WeightStack w = generate_lag_matrices(t, 1, 0.15, 0.9, 12);
  TimeSeriesData data = simulate_svar(w, 300, NoiseSpec{}, Mechanism::TanhNonlinear, 13);
  CHECK(data.rows() == 300);
  for (int j = 0; j < data.dim(); ++j) CHECK(std::abs(data.observations.col(j).mean()) < 1e-9);
}

TEST_CASE("standardize: idempotent") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(3.0, 7.0);
  Matrix x(50, 4);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = g(rng);
  Matrix s1 = standardize(x);
  Matrix s2 = standardize(s1);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("seed determinism: identical seed and config give identical bits") {
  GroundTruth t1 = generate_er_dag(10, 0.2, WeightRange{}, 77);
  GroundTruth t2 = generate_er_dag(10, 0.2, WeightRange{}, 77);
  CHECK(t1.weights.w[0] == t2.weights.w[0]);
  WeightStack w1 = generate_lag_matrices(t1, 2, 0.2, 0.9, 5);
  WeightStack w2 = generate_lag_matrices(t2, 2, 0.2, 0.9, 5);
  CHECK(w1.w[2] == w2.w[2]);
  TimeSeriesData d1 = simulate_svar(w1, 100, NoiseSpec{}, Mechanism::Linear, 4);
  TimeSeriesData d2 = simulate_svar(w2, 100, NoiseSpec{}, Mechanism::Linear, 4);
  CHECK(d1.observations == d2.observations);
}

TEST_CASE("lorenz96: bounded trajectory, ring truth, fixed point at F=0") {
  auto [data, truth] = simulate_lorenz96(10, 1000, 8.0, 0.05, 0);
  CHECK(data.rows() == 1000);

  int offdiag = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      if (i != j && truth.combined(i, j)) ++offdiag;
  CHECK(offdiag == 30);  // 3d

  // boundedness is checked on the raw attractor scale: std-normalized values
  // stay small, and the generator would have thrown on divergence
  CHECK(data.observations.cwiseAbs().maxCoeff() < 20.0);

  auto [flat, truth0] = simulate_lorenz96(8, 50, 0.0, 0.05, 3);
  // x(0) = 0 at F=0: the trajectory is constant, standardization leaves zeros
  CHECK(flat.observations.cwiseAbs().maxCoeff() < 1e-12);
  (void)truth0;
}

TEST_CASE("split_chronological: boundary and error") {
  TimeSeriesData d;
  d.lag_order = 1;
  d.observations = Matrix::Random(6, 2);
  auto [a, b] = split_chronological(d);
  CHECK(a.rows() == 3);
  CHECK(b.rows() == 3);
  d.observations = Matrix::Random(5, 2);
  CHECK_THROWS_AS(split_chronological(d), SplitError);
}

TEST_CASE("simulate_svar: explosive dynamics raise an instability error naming the seed") {
  WeightStack w(1, 3);
  w.w[1].diagonal().setConstant(1.6);  // lag radius 1.6: divergent
  try {
    simulate_svar(w, 400, NoiseSpec{}, Mechanism::Linear, 4242);
    FAIL("expected InstabilityError");
  } catch (const InstabilityError& e) {
    CHECK(std::string(e.what()).find("4242") != std::string::npos);
  }
}

TEST_CASE("lorenz96: oversized step diverges with an instability error") {
  CHECK_THROWS_AS(simulate_lorenz96(10, 200, 8.0, 5.0, 1), InstabilityError);
}
