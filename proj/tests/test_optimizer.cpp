#include <cmath>
#include <random>

#include "doctest.h"
#include "prcd/calibration.hpp"
#include "prcd/datagen.hpp"
#include "prcd/evaluation.hpp"
#include "prcd/optimizer.hpp"
#include "prcd/prior.hpp"

using namespace prcd;

namespace {

std::mt19937_64 g_rng(77);

PriorMatrix random_prior(int d, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  PriorMatrix p;
  p.values = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) p.values(i, j) = u(rng);
  return p;
}

PriorMatrix flat_prior(int d) {
  PriorMatrix p;
  p.values = Matrix::Constant(d, d, 0.5);
  p.values.diagonal().setZero();
  return p;
}

bool stacks_equal(const WeightStack& a, const WeightStack& b, double tol) {
  if (a.w.size() != b.w.size()) return false;
  for (size_t k = 0; k < a.w.size(); ++k)
    if ((a.w[k] - b.w[k]).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

}  // namespace

TEST_CASE("ridge_warm_start: infinite penalty kills all weights") {
  TimeSeriesData data;
  data.lag_order = 1;
  data.observations = standardize(Matrix::Random(100, 4));
  WeightStack w = ridge_warm_start(data, 1, 1e12);
  for (const Matrix& m : w.w) CHECK(m.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge_warm_start: d=2 closed-form normal equations") {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(50, 2);
  for (int i = 0; i < 50; ++i) {
    x(i, 0) = g(g_rng);
    x(i, 1) = 0.7 * x(i, 0) + 0.3 * g(g_rng);
  }
  TimeSeriesData data;
  data.lag_order = 0;
  data.observations = x;
  const double lam = 1e-2;
  WeightStack w = ridge_warm_start(data, 0, lam);
  // target 1 on regressor 0: beta = <x0,x1> / (<x0,x0> + lam)
  double b01 = x.col(0).dot(x.col(1)) / (x.col(0).squaredNorm() + lam);
  double b10 = x.col(1).dot(x.col(0)) / (x.col(1).squaredNorm() + lam);
  CHECK(w.w[0](0, 1) == doctest::Approx(b01).epsilon(1e-10));
  CHECK(w.w[0](1, 0) == doctest::Approx(b10).epsilon(1e-10));
  CHECK(w.w[0](0, 0) == 0.0);
}

TEST_CASE("ridge_warm_start: exact recovery of a sink's coefficients") {
  // independent root columns, one sink that is an exact linear combination
  std::normal_distribution<double> g(0.0, 1.0);
  const int T = 200;
  Matrix x(T, 4);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = g(g_rng);
  x.col(3) = 0.6 * x.col(0) - 0.4 * x.col(2);
  TimeSeriesData data;
  data.lag_order = 0;
  data.observations = x;
  WeightStack w = ridge_warm_start(data, 0, 1e-8);
  CHECK(w.w[0](0, 3) == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(w.w[0](1, 3) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(w.w[0](2, 3) == doctest::Approx(-0.4).epsilon(1e-6));
}

TEST_CASE("adam_inner_loop: quadratic bowl convergence") {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  WeightStack target(1, 3);
  for (int k = 0; k <= 1; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) target.w[static_cast<size_t>(k)](i, j) = u(g_rng);
  double norm = 0;
  for (const Matrix& m : target.w) norm += m.squaredNorm();
  if (norm > 1.0)
    for (Matrix& m : target.w) m /= std::sqrt(norm);

  auto bowl = [&](const WeightStack& w) {
    Evaluation ev;
    ev.grad = WeightStack(1, 3);
    for (size_t k = 0; k < w.w.size(); ++k) {
      Matrix diff = w.w[k] - target.w[k];
      ev.value += diff.squaredNorm();
      ev.grad.w[k] = 2.0 * diff;
    }
    return ev;
  };
  AdamOptions opts{400, 8e-3, 400, 0.0};
  InnerResult res = adam_inner_loop(WeightStack(1, 3), bowl, opts);
  double dist = 0;
  for (size_t k = 0; k < res.weights.w.size(); ++k)
    dist += (res.weights.w[k] - target.w[k]).squaredNorm();
  CHECK(std::sqrt(dist) < 1e-3);
}

TEST_CASE("adam_inner_loop: zero gradient exits at the patience step, unchanged") {
  auto flat = [](const WeightStack& w) {
    Evaluation ev;
    ev.value = 1.0;
    ev.grad = WeightStack(w.lag_order(), w.dim());
    return ev;
  };
  WeightStack w0(1, 2);
  w0.w[0](0, 1) = 0.33;
  AdamOptions opts{400, 8e-3, 50, 1e-6};
  InnerResult res = adam_inner_loop(w0, flat, opts);
  CHECK(res.steps == 50);
  CHECK(stacks_equal(res.weights, w0, 0.0));
}

TEST_CASE("adam_inner_loop: deterministic trajectories") {
  TimeSeriesData data;
  data.lag_order = 1;
  data.observations = standardize(Matrix::Random(60, 4));
  PriorMatrix prior = random_prior(4, 3);
  CalibratedPrior calib = calibrate(prior, Matrix::Constant(4, 4, 1.0));
  ObjectiveConfig cfg;
  AlmState alm{0.0, 1.0, 0};
  auto obj = [&](const WeightStack& w) {
    return augmented_lagrangian(w, data, calib, cfg, alm);
  };
  AdamOptions opts{100, 8e-3, 50, 1e-6};
  InnerResult a = adam_inner_loop(WeightStack(1, 4), obj, opts);
  InnerResult b = adam_inner_loop(WeightStack(1, 4), obj, opts);
  CHECK(a.steps == b.steps);
  CHECK(stacks_equal(a.weights, b.weights, 0.0));
}

TEST_CASE("adam_inner_loop: backtracks out of constraint-domain violations") {
  // a closure that throws when the entry crosses 0.9 and otherwise pulls up:
  // the proposed step overshoots the wall and halving must recover
  auto edgy = [](const WeightStack& w) {
    if (w.w[0].cwiseAbs().maxCoeff() > 0.9)
      throw ConstraintDomainError("outside");
    Evaluation ev;
    ev.value = -w.w[0](0, 1);
    ev.grad = WeightStack(0, 2);
    ev.grad.w[0](0, 1) = -1.0;  // push w(0,1) up toward the wall
    return ev;
  };
  WeightStack w0(0, 2);
  w0.w[0](0, 1) = 0.7;
  AdamOptions opts{3, 0.3, 50, 0.0};
  InnerResult res = adam_inner_loop(w0, edgy, opts);
  CHECK(res.weights.w[0](0, 1) <= 0.9);
  CHECK(res.weights.w[0](0, 1) > 0.7);

  // grinding into the wall exhausts the 10 halvings and surfaces DivergedError
  WeightStack at_wall(0, 2);
  at_wall.w[0](0, 1) = 0.9 - 1e-9;
  AdamOptions grind{50, 0.3, 50, 0.0};
  CHECK_THROWS_AS(adam_inner_loop(at_wall, edgy, grind), DivergedError);
}

TEST_CASE("eb_middle_loop: S=0 leaves trust untouched") {
  TimeSeriesData data;
  data.lag_order = 1;
  data.observations = standardize(Matrix::Random(40, 5));
  PriorMatrix prior = random_prior(5, 4);
  IntMatrix groups = group_edges_by_quantile(prior, 4);
  TrustParams t;
  t.variant = TrustParams::Variant::Grouped;
  t.tau = Vector::Constant(4, 0.7);
  TrustParams out = eb_middle_loop(t, WeightStack(1, 5), data, prior, groups, 0, 0.1,
                                   ObjectiveConfig{});
  CHECK(out.tau == t.tau);
}

TEST_CASE("eb_middle_loop: projection pins tau exactly at the bounds") {
  // all-high prior with zero labels: the agreement gradient pushes every
  // group's tau down; projection must stop exactly at tau_min
  PriorMatrix p;
  p.values = Matrix::Constant(5, 5, 0.9);
  p.values.diagonal().setZero();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) p.values(i, j) += 0.001 * (i * 5 + j);  // break ties for grouping
  p.values = p.values.cwiseMin(0.99);
  IntMatrix groups = group_edges_by_quantile(p, 2);
  TimeSeriesData data;
  data.lag_order = 1;
  data.observations = standardize(Matrix::Random(60, 5));
  TrustParams t;
  t.variant = TrustParams::Variant::Grouped;
  t.tau = Vector::Constant(2, 0.2);
  ObjectiveConfig cfg;
  cfg.lambda2 = 0.1;
  TrustParams out =
      eb_middle_loop(t, WeightStack(1, 5), data, p, groups, 200, 0.5, cfg);
  for (int g = 0; g < 2; ++g) CHECK(out.tau(g) == kTauMin);
}

TEST_CASE("fit: deterministic and schedule invariants hold") {
  GroundTruth truth = generate_er_dag(8, 0.2, WeightRange{}, 5);
  WeightStack w = generate_lag_matrices(truth, 1, 0.15, 0.9, 6);
  TimeSeriesData data = simulate_svar(w, 150, NoiseSpec{}, Mechanism::Linear, 7);
  CorruptionSpec cs;
  cs.accuracy = 0.8;
  PriorMatrix prior = make_prior(truth, cs, 8);

  ObjectiveConfig ocfg;
  ocfg.lambda1 = 5e-3;
  ocfg.lambda2 = 0.05;
  OptimizerConfig cfg;
  cfg.outer_iters = 9;
  cfg.inner_iters = 120;

  FitResult a = fit(data, prior, ocfg, cfg, 1);
  FitResult b = fit(data, prior, ocfg, cfg, 1);
  CHECK(stacks_equal(a.weights_raw, b.weights_raw, 0.0));
  CHECK(stacks_equal(a.weights, b.weights, 0.0));
  CHECK(a.trajectory.size() == b.trajectory.size());

  // lambda schedule: 5x for outers 1..floor(I/3), then 1x
  const int warm = cfg.outer_iters / 3;
  for (size_t i = 0; i < a.trajectory.size(); ++i) {
    double expect = (static_cast<int>(i) + 1 <= warm) ? 5.0 * ocfg.lambda1 : ocfg.lambda1;
    CHECK(a.trajectory[i].lambda1_eff == doctest::Approx(expect));
  }
  // rho trajectory: rho0 * gamma^k, capped, non-decreasing
  double expect_rho = cfg.rho0;
  for (size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].rho == doctest::Approx(expect_rho));
    expect_rho = std::min(cfg.gamma * expect_rho, cfg.rho_max);
  }

  // thresholding never grows support, and the post-threshold graph is a DAG
  for (size_t k = 0; k < a.weights.w.size(); ++k) {
    int raw_nz = 0, thr_nz = 0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        raw_nz += a.weights_raw.w[k](i, j) != 0.0;
        thr_nz += a.weights.w[k](i, j) != 0.0;
      }
    CHECK(thr_nz <= raw_nz);
  }
  IntMatrix sup = (a.weights.w[0].array() != 0.0).cast<int>();
  CHECK_FALSE(has_cycle(sup));
  CHECK(std::abs(a.final_h) < 5e-3);  // 9 outers: rho ~ 3^8, |h| ~ 1/rho
}

TEST_CASE("fit: fixed tau at the floor equals a flat-prior run") {
  GroundTruth truth = generate_er_dag(6, 0.25, WeightRange{}, 15);
  WeightStack w = generate_lag_matrices(truth, 1, 0.15, 0.9, 16);
  TimeSeriesData data = simulate_svar(w, 120, NoiseSpec{}, Mechanism::Linear, 17);
  CorruptionSpec cs;
  cs.accuracy = 0.4;
  PriorMatrix noisy = make_prior(truth, cs, 18);

  ObjectiveConfig ocfg;
  ocfg.lambda1 = 5e-3;
  ocfg.lambda2 = 0.05;
  OptimizerConfig cfg;
  cfg.outer_iters = 6;
  cfg.inner_iters = 80;
  cfg.trust_variant = TrustParams::Variant::Fixed;
  cfg.fixed_tau_const = kTauMin;
  cfg.middle_iters = 0;

  FitResult with_noisy = fit(data, noisy, ocfg, cfg, 3);
  FitResult with_flat = fit(data, flat_prior(6), ocfg, cfg, 3);
  CHECK(stacks_equal(with_noisy.weights_raw, with_flat.weights_raw, 1e-8));
}

TEST_CASE("fit: noise-driven K=0 triangular SEM support recovery at large T") {
  // Raw (unstandardized) equal-variance SEM: the scale carries the
  // orientation information that the DAG-penalized lasso provably recovers.
  const int d = 8, T = 3000;
  GroundTruth truth = generate_er_dag(d, 0.25, WeightRange{}, 42);
  std::vector<int> order = topological_order(truth.adjacency_per_lag[0]);
  const Matrix w0 = truth.weights.w[0];
  std::mt19937_64 rng(43);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(T, d);
  for (int t = 0; t < T; ++t)
    for (int j : order) {
      double v = g(rng);
      for (int i = 0; i < d; ++i)
        if (w0(i, j) != 0.0) v += w0(i, j) * x(t, i);
      x(t, j) = v;
    }
  TimeSeriesData data;
  data.observations = x;
  data.lag_order = 0;

  ObjectiveConfig ocfg;
  ocfg.lambda1 = 8e-3;
  ocfg.lambda2 = 1e-3;
  OptimizerConfig cfg;
  cfg.outer_iters = 20;
  cfg.inner_iters = 300;
  cfg.trust_variant = TrustParams::Variant::Fixed;
  cfg.fixed_tau_const = kTauMin;
  cfg.middle_iters = 0;

  FitResult res = fit(data, flat_prior(d), ocfg, cfg, 44);
  IntMatrix predicted = predicted_combined(res);
  CHECK(predicted == truth.combined);
}

TEST_CASE("fit: lags_only zeroes the instantaneous head") {
  GroundTruth truth = generate_er_dag(6, 0.25, WeightRange{}, 25);
  WeightStack w = generate_lag_matrices(truth, 1, 0.2, 0.9, 26);
  TimeSeriesData data = simulate_svar(w, 150, NoiseSpec{}, Mechanism::Linear, 27);
  PriorMatrix prior = random_prior(6, 28);
  OptimizerConfig cfg;
  cfg.outer_iters = 4;
  cfg.inner_iters = 100;
  cfg.lags_only = true;
  FitResult res = fit(data, prior, ObjectiveConfig{}, cfg, 1);
  CHECK(res.weights_raw.w[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.weights_raw.w[1].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fit: hard mask keeps masked entries at zero across lags") {
  GroundTruth truth = generate_er_dag(6, 0.25, WeightRange{}, 35);
  WeightStack w = generate_lag_matrices(truth, 1, 0.2, 0.9, 36);
  TimeSeriesData data = simulate_svar(w, 150, NoiseSpec{}, Mechanism::Linear, 37);
  PriorMatrix prior = random_prior(6, 38);
  OptimizerConfig cfg;
  cfg.outer_iters = 4;
  cfg.inner_iters = 100;
  cfg.hard_mask = true;
  cfg.trust_variant = TrustParams::Variant::Fixed;
  cfg.fixed_tau_const = kTauMin;
  cfg.middle_iters = 0;
  FitResult res = fit(data, prior, ObjectiveConfig{}, cfg, 1);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j && prior.values(i, j) < 0.5) {
        CHECK(res.weights_raw.w[0](i, j) == 0.0);
        CHECK(res.weights_raw.w[1](i, j) == 0.0);
      }
  // lag diagonal stays free
  CHECK(res.weights_raw.w[1].diagonal().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("fit: trust_mlp variant runs and respects tau bounds") {
  GroundTruth truth = generate_er_dag(6, 0.25, WeightRange{}, 45);
  WeightStack w = generate_lag_matrices(truth, 1, 0.2, 0.9, 46);
  TimeSeriesData data = simulate_svar(w, 150, NoiseSpec{}, Mechanism::Linear, 47);
  CorruptionSpec cs;
  cs.accuracy = 0.8;
  PriorMatrix prior = make_prior(truth, cs, 48);
  OptimizerConfig cfg;
  cfg.outer_iters = 4;
  cfg.inner_iters = 80;
  cfg.trust_variant = TrustParams::Variant::TrustMlp;
  FitResult res = fit(data, prior, ObjectiveConfig{}, cfg, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      if (i != j) {
        CHECK(res.tau_realized(i, j) >= kTauMin);
        CHECK(res.tau_realized(i, j) <= kTauMax);
      }
}
