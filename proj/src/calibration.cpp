#include "prcd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace prcd {

CalibratedPrior calibrate(const PriorMatrix& prior, const Matrix& tau_per_edge) {
  const int d = prior.dim();
  CalibratedPrior out;
  out.p_hat = Matrix::Constant(d, d, 0.5);
  out.tau_realized = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      double u = logit(clip(prior.values(i, j), kEpsClip, 1.0 - kEpsClip));
      out.p_hat(i, j) = sigmoid(u * tau_per_edge(i, j));
      out.tau_realized(i, j) = tau_per_edge(i, j);
    }
  return out;
}

CalibratedPrior calibrate_grouped(const PriorMatrix& prior, const Vector& tau,
                                  const IntMatrix& groups) {
  const int d = prior.dim();
  Matrix tau_edge = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) tau_edge(i, j) = tau(groups(i, j));
  return calibrate(prior, tau_edge);
}

Matrix l1_weights(const CalibratedPrior& calibrated) {
  return (1.5 - calibrated.p_hat.array()).cwiseMax(0.1).cwiseMin(1.5).matrix();
}

Matrix precision_mask(const CalibratedPrior& calibrated) {
  return (1.0 - calibrated.p_hat.array() + kOmegaDelta).matrix();
}

TrustFeatures trust_features(const PriorMatrix& prior, const WeightStack& w_star) {
  const int d = prior.dim();
  if (d < 3) throw ParameterError("trust_features: need d >= 3 for a nonempty neighborhood");
  const Matrix& p = prior.values;
  Matrix wn = w_star.instantaneous_masked().cwiseAbs();
  double wmax = wn.maxCoeff();
  if (wmax > 0.0) wn /= wmax;  // all-zero stays all-zero (degenerate warm start)

  // Row/column off-diagonal sums for O(d^2) neighborhood statistics.
  auto offdiag_sums = [d](const Matrix& m, Vector& row, Vector& col, Vector& row2, Vector& col2) {
    row = m.rowwise().sum() - m.diagonal();
    col = m.colwise().sum().transpose() - m.diagonal();
    Matrix sq = m.cwiseProduct(m);
    row2 = sq.rowwise().sum() - sq.diagonal();
    col2 = sq.colwise().sum().transpose() - sq.diagonal();
  };
  Vector pr, pc, pr2, pc2, wr, wc, wr2, wc2;
  offdiag_sums(p, pr, pc, pr2, pc2);
  offdiag_sums(wn, wr, wc, wr2, wc2);

  const double nn = 2.0 * (d - 2);  // |N(i,j)| excluding the diagonal
  TrustFeatures f;
  f.d = d;
  f.z.resize(d * (d - 1), 6);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      int e = TrustFeatures::edge_index(i, j, d);
      double psum = pr(i) + pc(j) - 2.0 * p(i, j);
      double psum2 = pr2(i) + pc2(j) - 2.0 * p(i, j) * p(i, j);
      double pmean = psum / nn;
      double pvar = std::max(0.0, psum2 / nn - pmean * pmean);
      double wsum = wr(i) + wc(j) - 2.0 * wn(i, j);
      double wmean = wsum / nn;
      f.z(e, 0) = p(i, j);
      f.z(e, 1) = pmean;
      f.z(e, 2) = std::sqrt(pvar);  // population std
      f.z(e, 3) = wn(i, j);
      f.z(e, 4) = wmean;
      f.z(e, 5) = 4.0 * (p(i, j) - 0.5) * (wn(i, j) - 0.5);
    }
  return f;
}

Matrix trust_mlp_forward(const TrustFeatures& features, const MlpParams& theta, double bias_b) {
  const int d = features.d;
  // hidden = tanh(W1 z + b1), out = w2 . hidden + b2 + bias_b
  Matrix hidden = (features.z * theta.w1.transpose()).rowwise() + theta.b1.transpose();
  hidden = hidden.array().tanh();
  Vector y = hidden * theta.w2;
  y.array() += theta.b2 + bias_b;

  Matrix tau = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j)
        tau(i, j) = kTauMin + (kTauMax - kTauMin) * sigmoid(y(TrustFeatures::edge_index(i, j, d)));
  return tau;
}

MlpGradients trust_mlp_backward(const TrustFeatures& features, const MlpParams& theta,
                                double bias_b, const Matrix& dloss_dtau) {
  const int d = features.d;
  const int n = d * (d - 1);
  Matrix pre = (features.z * theta.w1.transpose()).rowwise() + theta.b1.transpose();
  Matrix hidden = pre.array().tanh();
  Vector y = hidden * theta.w2;
  y.array() += theta.b2 + bias_b;

  Vector dy(n);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      int e = TrustFeatures::edge_index(i, j, d);
      double s = sigmoid(y(e));
      dy(e) = dloss_dtau(i, j) * (kTauMax - kTauMin) * s * (1.0 - s);
    }

  MlpGradients g;
  g.w2 = hidden.transpose() * dy;
  g.b2 = dy.sum();
  g.bias_b = dy.sum();
  Matrix dhidden = dy * theta.w2.transpose();                      // n x 16
  Matrix dpre = dhidden.array() * (1.0 - hidden.array().square()); // tanh'
  g.w1 = dpre.transpose() * features.z;                            // 16 x 6
  g.b1 = dpre.colwise().sum().transpose();
  return g;
}

double spearman(const Vector& a, const Vector& b) {
  const int n = static_cast<int>(a.size());
  if (n < 2) return 0.0;
  auto ranks = [n](const Vector& v) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int l, int r) { return v(l) < v(r); });
    Vector rk(n);
    int s = 0;
    while (s < n) {
      int e = s;
      while (e + 1 < n && v(idx[static_cast<size_t>(e + 1)]) == v(idx[static_cast<size_t>(s)])) ++e;
      double avg = 0.5 * (s + e) + 1.0;  // average rank, 1-based
      for (int t = s; t <= e; ++t) rk(idx[static_cast<size_t>(t)]) = avg;
      s = e + 1;
    }
    return rk;
  };
  Vector ra = ranks(a), rb = ranks(b);
  ra.array() -= ra.mean();
  rb.array() -= rb.mean();
  double na = ra.norm(), nb = rb.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return ra.dot(rb) / (na * nb);
}

std::pair<double, double> spearman_precalibrate(const TimeSeriesData& data,
                                                const PriorMatrix& prior) {
  const int d = data.dim();
  const int T = data.rows();
  if (T < 3) throw ParameterError("spearman_precalibrate: need T >= 3");
  if (prior.dim() != d) throw DimensionError("spearman_precalibrate: prior/data dimension");

  // |sample correlation|; constant columns yield zero correlation entries.
  Matrix x = data.observations;
  Vector sd(d);
  for (int j = 0; j < d; ++j) {
    x.col(j).array() -= x.col(j).mean();
    sd(j) = x.col(j).norm();
  }
  Matrix corr = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j && sd(i) > 1e-12 && sd(j) > 1e-12)
        corr(i, j) = std::abs(x.col(i).dot(x.col(j)) / (sd(i) * sd(j)));

  const int n = d * (d - 1);
  Vector va(n), vb(n);
  int e = 0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) {
        va(e) = corr(i, j);
        vb(e) = prior.values(i, j);
        ++e;
      }
  double rho = spearman(va, vb);
  double tau_init = clip(kTauMin + (kTauMax - kTauMin) * std::max(rho, 0.0), kTauMin, kTauMax);
  double frac = (tau_init - kTauMin) / (kTauMax - kTauMin);
  double b;
  if (frac <= 0.0)
    b = -6.0;
  else if (frac >= 1.0)
    b = 6.0;
  else
    b = clip(logit(frac), -6.0, 6.0);
  return {tau_init, b};
}

MlpParams init_mlp(uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  MlpParams p;
  p.w1.resize(16, 6);
  p.b1.resize(16);
  p.w2.resize(16);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 6; ++j) p.w1(i, j) = u(rng);
  for (int i = 0; i < 16; ++i) p.b1(i) = u(rng);
  for (int i = 0; i < 16; ++i) p.w2(i) = u(rng);
  p.b2 = u(rng);
  return p;
}

}  // namespace prcd
