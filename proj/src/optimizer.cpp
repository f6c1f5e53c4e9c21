#include "prcd/optimizer.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "prcd/calibration.hpp"
#include "prcd/datagen.hpp"
#include "prcd/prior.hpp"

namespace prcd {

WeightStack ridge_warm_start(const TimeSeriesData& data, int K, double ridge_penalty) {
  const int T = data.rows();
  const int d = data.dim();
  if (T <= K) throw ParameterError("ridge_warm_start: need T > K");
  const int n = T - K;
  const Matrix& x = data.observations;

  // Shared design: all contemporaneous columns then all lag columns; per
  // target j the j-th contemporaneous column is excluded.
  const int p = (K + 1) * d;
  Matrix design(n, p);
  for (int k = 0; k <= K; ++k) design.middleCols(k * d, d) = x.block(K - k, 0, n, d);
  Matrix gram = design.transpose() * design;
  Vector xty_all(p);

  WeightStack w(K, d);
  for (int j = 0; j < d; ++j) {
    // Drop column j of the contemporaneous block.
    std::vector<int> cols;
    cols.reserve(p - 1);
    for (int c = 0; c < p; ++c)
      if (c != j) cols.push_back(c);
    Matrix a(p - 1, p - 1);
    Vector b(p - 1);
    Vector target = x.block(K, 0, n, d).col(j);
    for (int r = 0; r < p - 1; ++r) {
      b(r) = design.col(cols[static_cast<size_t>(r)]).dot(target);
      for (int c = 0; c < p - 1; ++c)
        a(r, c) = gram(cols[static_cast<size_t>(r)], cols[static_cast<size_t>(c)]);
    }
    a.diagonal().array() += ridge_penalty;
    Vector beta = a.ldlt().solve(b);
    for (int r = 0; r < p - 1; ++r) {
      int c = cols[static_cast<size_t>(r)];
      int k = c / d, i = c % d;
      w.w[static_cast<size_t>(k)](i, j) = beta(r);
    }
  }
  w.w[0].diagonal().setZero();
  return w;
}

InnerResult adam_inner_loop(WeightStack weights,
                            const std::function<Evaluation(const WeightStack&)>& objective,
                            const AdamOptions& options,
                            const std::function<void(WeightStack&)>& project) {
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const int K = weights.lag_order();
  const int d = weights.dim();

  std::vector<Matrix> m(static_cast<size_t>(K) + 1, Matrix::Zero(d, d));
  std::vector<Matrix> v(static_cast<size_t>(K) + 1, Matrix::Zero(d, d));

  Evaluation ev = objective(weights);
  double best = ev.value;
  int stall = 0;
  InnerResult out;
  for (int step = 0; step < options.max_steps; ++step) {
    double lr_t = options.lr * 0.5 * (1.0 + std::cos(M_PI * step / options.max_steps));
    double c1 = 1.0 - std::pow(beta1, step + 1);
    double c2 = 1.0 - std::pow(beta2, step + 1);

    WeightStack next = weights;
    for (int k = 0; k <= K; ++k) {
      const Matrix& g = ev.grad.w[static_cast<size_t>(k)];
      Matrix& mk = m[static_cast<size_t>(k)];
      Matrix& vk = v[static_cast<size_t>(k)];
      mk = beta1 * mk + (1.0 - beta1) * g;
      vk = beta2 * vk + (1.0 - beta2) * g.cwiseProduct(g);
      next.w[static_cast<size_t>(k)] -=
          lr_t * (mk / c1).cwiseQuotient(((vk / c2).cwiseSqrt().array() + eps).matrix());
    }
    if (project) project(next);

    bool ok = false;
    Evaluation ev_next;
    for (int bt = 0; bt < 10; ++bt) {
      try {
        ev_next = objective(next);
        ok = true;
        break;
      } catch (const ConstraintDomainError&) {
        for (int k = 0; k <= K; ++k)
          next.w[static_cast<size_t>(k)] =
              weights.w[static_cast<size_t>(k)] +
              0.5 * (next.w[static_cast<size_t>(k)] - weights.w[static_cast<size_t>(k)]);
        if (project) project(next);
      }
    }
    if (!ok) throw DivergedError("adam_inner_loop: repeated constraint-domain errors");
    if (!std::isfinite(ev_next.value)) throw DivergedError("adam_inner_loop: non-finite loss");

    weights = std::move(next);
    ev = std::move(ev_next);
    out.steps = step + 1;

    if (ev.value < best - options.stall_tol) {
      best = ev.value;
      stall = 0;
    } else if (++stall >= options.patience) {
      break;
    }
  }
  out.weights = std::move(weights);
  out.final_value = ev.value;
  return out;
}

TrustParams eb_middle_loop(TrustParams trust, const WeightStack& w_star,
                           const TimeSeriesData& data, const PriorMatrix& prior,
                           const IntMatrix& groups, int S, double middle_lr,
                           const ObjectiveConfig& config, double mlp_lr_scale) {
  if (S < 0) throw ParameterError("eb_middle_loop: S must be >= 0");
  const int d = prior.dim();
  const double scale = middle_lr / (static_cast<double>(d) * (d - 1));

  if (trust.variant == TrustParams::Variant::Grouped) {
    for (int s = 0; s < S; ++s) {
      EbGroupedEval ev = eb_objective_grouped(trust.tau, w_star, data, prior, groups, config);
      for (Eigen::Index g = 0; g < trust.tau.size(); ++g)
        trust.tau(g) = clip(trust.tau(g) - scale * ev.grad(g), kTauMin, kTauMax);
    }
  } else if (trust.variant == TrustParams::Variant::TrustMlp) {
    // the MLP spreads the same per-edge signal over 129 parameters; it needs
    // a larger step metric than the G-dimensional projected update
    const double mscale = scale * mlp_lr_scale;
    for (int s = 0; s < S; ++s) {
      EbMlpEval ev = eb_objective_mlp(trust.mlp, trust.bias_b, w_star, data, prior, config);
      trust.mlp.w1 -= mscale * ev.grad.w1;
      trust.mlp.b1 -= mscale * ev.grad.b1;
      trust.mlp.w2 -= mscale * ev.grad.w2;
      trust.mlp.b2 -= mscale * ev.grad.b2;
      trust.bias_b -= mscale * ev.grad.bias_b;
    }
  }
  return trust;  // Fixed: unchanged
}

CalibratedPrior realize_calibration(const TrustParams& trust, const PriorMatrix& prior,
                                    const IntMatrix& groups, const WeightStack& w_current) {
  switch (trust.variant) {
    case TrustParams::Variant::Grouped:
      return calibrate_grouped(prior, trust.tau, groups);
    case TrustParams::Variant::TrustMlp: {
      TrustFeatures f = trust_features(prior, w_current);
      return calibrate(prior, trust_mlp_forward(f, trust.mlp, trust.bias_b));
    }
    case TrustParams::Variant::Fixed: {
      const int d = prior.dim();
      // tau_const at (or below) the floor is the no-prior boundary: collapse
      // the calibration to exactly 0.5 so the run matches a flat prior.
      double tau = trust.tau_const <= kTauMin ? 0.0 : trust.tau_const;
      return calibrate(prior, Matrix::Constant(d, d, tau));
    }
  }
  throw ParameterError("realize_calibration: unknown variant");
}

namespace {

// One directed cycle in the support digraph as a list of edges, empty if none.
std::vector<std::pair<int, int>> find_cycle(const IntMatrix& adj) {
  const int d = static_cast<int>(adj.rows());
  std::vector<int> color(d, 0), parent(d, -1);
  std::vector<std::pair<int, int>> cycle;

  std::function<bool(int)> dfs = [&](int u) -> bool {
    color[u] = 1;
    for (int j = 0; j < d; ++j) {
      if (adj(u, j) == 0) continue;
      if (color[j] == 1) {
        cycle.emplace_back(u, j);
        for (int c = u; c != j; c = parent[c]) cycle.emplace_back(parent[c], c);
        return true;
      }
      if (color[j] == 0) {
        parent[j] = u;
        if (dfs(j)) return true;
      }
    }
    color[u] = 2;
    return false;
  };
  for (int s = 0; s < d; ++s)
    if (color[s] == 0 && dfs(s)) return cycle;
  return {};
}

IntMatrix support(const Matrix& w) {
  return (w.array() != 0.0).cast<int>();
}

}  // namespace

FitResult fit(const TimeSeriesData& data, const PriorMatrix& prior, const ObjectiveConfig& ocfg,
              const OptimizerConfig& cfg, uint64_t rng_seed) {
  const int d = data.dim();
  const int K = data.lag_order;
  if (prior.dim() != d) throw DimensionError("fit: prior dimension mismatch");
  if (cfg.trust_variant == TrustParams::Variant::TrustMlp && d < 3)
    throw ParameterError("fit: trust_mlp needs d >= 3");

  const IntMatrix groups = group_edges_by_quantile(prior, cfg.groups);

  // Optional hard support mask (off-diagonal only; lag diagonals stay free).
  Matrix mask;
  if (cfg.hard_mask) {
    mask = Matrix::Ones(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j && prior.values(i, j) < 0.5) mask(i, j) = 0.0;
  }

  auto apply_constraints = [&](WeightStack& w) {
    w.w[0].diagonal().setZero();
    if (cfg.lags_only) w.w[0].setZero();
    if (cfg.hard_mask)
      for (int k = 0; k <= K; ++k) {
        Matrix m = mask;
        if (k > 0) m.diagonal().setOnes();
        w.w[static_cast<size_t>(k)] = w.w[static_cast<size_t>(k)].cwiseProduct(m);
      }
  };

  WeightStack w = cfg.warm_start ? ridge_warm_start(data, K, cfg.ridge_penalty)
                                 : WeightStack(K, d);
  apply_constraints(w);
  for (int tries = 0; tries < 64; ++tries) {
    try {
      dag_penalty(w.instantaneous_masked(), ocfg.dag_s);
      break;
    } catch (const ConstraintDomainError&) {
      if (tries == 63) throw DivergedError("fit: could not find a feasible warm start");
      w.w[0] *= 0.5;
    }
  }

  auto [tau_init, bias_init] = spearman_precalibrate(data, prior);
  TrustParams trust;
  trust.variant = cfg.trust_variant;
  switch (cfg.trust_variant) {
    case TrustParams::Variant::Grouped:
      trust.tau = Vector::Constant(cfg.groups, tau_init);
      break;
    case TrustParams::Variant::TrustMlp:
      trust.mlp = init_mlp(rng_seed);
      trust.bias_b = bias_init;
      break;
    case TrustParams::Variant::Fixed:
      trust.tau_const = cfg.fixed_tau_const;
      break;
  }

  AlmState alm;
  alm.rho = cfg.rho0;
  FitResult result;
  CalibratedPrior calib = realize_calibration(trust, prior, groups, w);

  const int warm_outer = cfg.outer_iters / 3;
  for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
    ObjectiveConfig eff = ocfg;
    if (outer <= warm_outer) eff.lambda1 *= cfg.lambda_warm_factor;

    calib = realize_calibration(trust, prior, groups, w);
    auto closure = [&](const WeightStack& ws) {
      Evaluation ev = augmented_lagrangian(ws, data, calib, eff, alm);
      if (cfg.lags_only) ev.grad.w[0].setZero();
      if (cfg.hard_mask)
        for (int k = 0; k <= K; ++k) {
          Matrix m = mask;
          if (k > 0) m.diagonal().setOnes();
          ev.grad.w[static_cast<size_t>(k)] =
              ev.grad.w[static_cast<size_t>(k)].cwiseProduct(m);
        }
      return ev;
    };

    AdamOptions opts{cfg.inner_iters, cfg.inner_lr, cfg.inner_patience, cfg.inner_stall_tol};
    InnerResult inner = adam_inner_loop(w, closure, opts, apply_constraints);
    w = std::move(inner.weights);

    if (cfg.middle_iters > 0 && trust.variant != TrustParams::Variant::Fixed)
      trust = eb_middle_loop(trust, w, data, prior, groups, cfg.middle_iters, cfg.middle_lr, ocfg,
                             cfg.mlp_lr_scale);

    calib = realize_calibration(trust, prior, groups, w);
    double h = dag_penalty(w.instantaneous_masked(), ocfg.dag_s).h;
    result.trajectory.push_back(
        {h, inner.final_value, offdiag_mean(calib.tau_realized), eff.lambda1, alm.rho});
    result.outer_iterations = outer;
    result.final_h = h;
    if (std::abs(h) < cfg.dag_tol) break;
    alm.alpha += alm.rho * h;
    alm.rho = std::min(cfg.gamma * alm.rho, cfg.rho_max);
    alm.outer_iter = outer;
  }

  result.weights_raw = w;
  result.trust = trust;
  result.tau_realized = calib.tau_realized;

  // Threshold from the instantaneous magnitude, applied across all lags.
  WeightStack thresholded = w;
  double theta = cfg.threshold_ratio * w.instantaneous_masked().cwiseAbs().maxCoeff();
  for (int k = 0; k <= K; ++k) {
    Matrix& wk = thresholded.w[static_cast<size_t>(k)];
    wk = (wk.cwiseAbs().array() < theta).select(Matrix::Zero(d, d), wk);
  }
  thresholded.w[0].diagonal().setZero();

  // h ~ tol can leave numerical cycles; drop the weakest edge per cycle.
  IntMatrix sup = support(thresholded.w[0]);
  while (true) {
    auto cycle = find_cycle(sup);
    if (cycle.empty()) break;
    double wmin = std::numeric_limits<double>::infinity();
    std::pair<int, int> victim = cycle.front();
    for (auto& e : cycle) {
      double a = std::abs(thresholded.w[0](e.first, e.second));
      if (a < wmin) {
        wmin = a;
        victim = e;
      }
    }
    thresholded.w[0](victim.first, victim.second) = 0.0;
    sup(victim.first, victim.second) = 0;
  }

  result.weights = std::move(thresholded);
  return result;
}

}  // namespace prcd
