#include "jcas/sensing_rx.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jcas {

CorrelationMatrix correlate(const CMat& z_s) {
  if (z_s.cols() < 1) throw std::invalid_argument("correlate: need at least one snapshot");
  const std::size_t k = z_s.rows();
  const std::size_t n = z_s.cols();
  CorrelationMatrix c(k, k);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      cplx s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += z_s(i, t) * std::conj(z_s(j, t));
      s *= inv;
      c(i, j) = s;
      c(j, i) = std::conj(s);
    }
  }
  return c;
}

std::vector<double> sensing_features(const CorrelationMatrix& corr, int n_win, double sigma_ns2) {
  if (sigma_ns2 <= 0.0) throw std::invalid_argument("sensing_features: sigma_ns2 must be positive");
  const std::size_t k = corr.rows();
  std::vector<double> f(2 * k * k + 2);
  const double inv = 1.0 / sigma_ns2;
  std::size_t at = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      f[at++] = corr(i, j).real() * inv;
      f[at++] = corr(i, j).imag() * inv;
    }
  f[at++] = static_cast<double>(n_win) / 15.0;
  f[at++] = std::log10(sigma_ns2);
  return f;
}

DetectionResult detect(const Mlp& net, const std::vector<double>& features, double tau,
                       bool tau_calibrated) {
  RealMat batch(1, features.size());
  batch.a = features;
  const double offs[1] = {tau};
  Tape tape = mlp_forward(net, std::move(batch), std::span<const double>(offs, 1));
  DetectionResult r;
  r.score = tape.post.back()(0, 0);
  r.p_target = tape.head_out(0, 0);
  r.decision = r.p_target > 0.5;
  r.calibrated = tau_calibrated;
  return r;
}

double estimate_aoa(const Mlp& net, const std::vector<double>& features) {
  RealMat batch(1, features.size());
  batch.a = features;
  Tape tape = mlp_forward(net, std::move(batch));
  return tape.head_out(0, 0);
}

ThresholdResult calibrate_threshold(const std::vector<double>& noise_only_scores, double p_f) {
  if (noise_only_scores.empty())
    throw std::invalid_argument("calibrate_threshold: no scores supplied");
  if (p_f <= 0.0 || p_f >= 1.0)
    throw std::invalid_argument("calibrate_threshold: P_f must be in (0,1)");

  std::vector<double> sorted = noise_only_scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil((1.0 - p_f) * static_cast<double>(n)));
  rank = std::min(std::max<std::size_t>(rank, 1), n);

  ThresholdResult out;
  out.tau = -sorted[rank - 1];
  out.degenerate = sorted.front() == sorted.back();
  out.enough_scores = static_cast<double>(n) * p_f >= 1.0;
  return out;
}

CMat sufficient_statistic(const CMat& z_s, const CMat& y) {
  if (z_s.cols() != y.cols() || z_s.rows() != y.rows())
    throw std::invalid_argument("sufficient_statistic: frame shapes must match");
  const double inv = 1.0 / std::sqrt(static_cast<double>(z_s.cols()));
  CMat eta = z_s * y.adjoint();
  for (std::size_t i = 0; i < eta.rows(); ++i)
    for (std::size_t j = 0; j < eta.cols(); ++j) eta(i, j) *= inv;
  return eta;
}

CorrelationMatrix sufficient_statistic_approx(const CMat& z_s) { return correlate(z_s); }

}  // namespace jcas
