#include "jcas/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "jcas/special.hpp"

namespace jcas {

namespace {

const double kLn2 = std::log(2.0);

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(std::min(x, 30.0))); }

double clamp_llr(double x) { return std::clamp(x, -kLlrClamp, kLlrClamp); }

}  // namespace

double loss_comm_bce(const std::vector<double>& llrs, const std::vector<std::uint8_t>& bits) {
  if (llrs.size() != bits.size()) throw std::invalid_argument("loss_comm_bce: shape mismatch");
  if (llrs.empty()) return 0.0;
  std::vector<double> terms(llrs.size());
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    const double ell = clamp_llr(llrs[i]);
    // -log2 p(b): softplus(ell) for b = 1, softplus(-ell) for b = 0
    terms[i] = (bits[i] ? softplus(ell) : softplus(-ell)) / kLn2;
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

std::vector<double> loss_comm_bce_grad(const std::vector<double>& llrs,
                                       const std::vector<std::uint8_t>& bits) {
  if (llrs.size() != bits.size()) throw std::invalid_argument("loss_comm_bce_grad: shape mismatch");
  std::vector<double> g(llrs.size());
  const double inv = 1.0 / (kLn2 * static_cast<double>(llrs.size()));
  for (std::size_t i = 0; i < llrs.size(); ++i) {
    const double ell = llrs[i];
    if (ell <= -kLlrClamp || ell >= kLlrClamp) {
      g[i] = 0.0;  // clamped region
      continue;
    }
    const double s = 1.0 / (1.0 + std::exp(-ell));  // sigma(ell)
    g[i] = (bits[i] ? s : s - 1.0) * inv;
  }
  return g;
}

double loss_detect_bce(const std::vector<double>& p_target, const std::vector<std::uint8_t>& t) {
  if (p_target.size() != t.size()) throw std::invalid_argument("loss_detect_bce: shape mismatch");
  if (p_target.empty()) return 0.0;
  const double eps = 1e-12;
  std::vector<double> terms(p_target.size());
  for (std::size_t i = 0; i < p_target.size(); ++i) {
    const double p = std::clamp(p_target[i], eps, 1.0 - eps);
    terms[i] = -(t[i] ? std::log2(p) : std::log2(1.0 - p));
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double loss_angle_crb_normalized(const std::vector<double>& theta_hat, const BatchLabels& labels) {
  if (theta_hat.size() != labels.targets.size())
    throw std::invalid_argument("loss_angle: shape mismatch");
  if (theta_hat.empty()) return 0.0;
  std::vector<double> terms(theta_hat.size(), 0.0);
  for (std::size_t i = 0; i < theta_hat.size(); ++i) {
    if (!labels.targets[i]) continue;
    const double e = labels.thetas[i] - theta_hat[i];
    terms[i] = static_cast<double>(labels.n_wins[i]) / labels.sigma_ns2[i] * e * e;
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double loss_angle_unmodified(const std::vector<double>& theta_hat, const BatchLabels& labels) {
  if (theta_hat.size() != labels.targets.size())
    throw std::invalid_argument("loss_angle: shape mismatch");
  if (theta_hat.empty()) return 0.0;
  std::vector<double> terms(theta_hat.size(), 0.0);
  for (std::size_t i = 0; i < theta_hat.size(); ++i) {
    if (!labels.targets[i]) continue;
    const double e = labels.thetas[i] - theta_hat[i];
    terms[i] = e * e;
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

double loss_total(const LossParts& parts, const LossWeights& w) {
  if (w.w_s < 0.0 || w.w_s > 1.0) throw std::invalid_argument("loss_total: w_s must be in [0,1]");
  return (1.0 - w.w_s) * parts.comm + w.w_s * parts.detect + w.w_s * parts.angle;
}

namespace {
constexpr double kRateFloor = 1e-6;
}

double loss_alpha_fair(const std::vector<double>& per_ue_rates, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("loss_alpha_fair: alpha must be nonnegative");
  double acc = 0.0;
  for (double r : per_ue_rates) {
    const double rate = std::max(r, kRateFloor);
    if (alpha == 1.0)
      acc -= std::log2(rate);
    else
      acc -= std::pow(rate, 1.0 - alpha) / (1.0 - alpha);
  }
  return acc;
}

std::vector<double> loss_alpha_fair_grad(const std::vector<double>& per_ue_rates, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("loss_alpha_fair_grad: alpha must be nonnegative");
  std::vector<double> g(per_ue_rates.size(), 0.0);
  for (std::size_t i = 0; i < per_ue_rates.size(); ++i) {
    const double r = per_ue_rates[i];
    if (r < kRateFloor) continue;  // flat below the floor
    if (alpha == 1.0)
      g[i] = -1.0 / (r * kLn2);
    else
      g[i] = -std::pow(r, -alpha);
  }
  return g;
}

double metric_bmi(const std::vector<double>& llrs, const std::vector<std::uint8_t>& bits,
                  std::size_t mod_order) {
  const double nbits = std::log2(static_cast<double>(mod_order));
  // total BCE across bit positions = log2(M) * mean BCE over all slots
  const double total_bce = nbits * loss_comm_bce(llrs, bits);
  return std::clamp(nbits - total_bce, 0.0, nbits);
}

SensingMetrics metric_sensing(const std::vector<std::uint8_t>& decisions,
                              const std::vector<std::uint8_t>& t,
                              const std::vector<double>& theta_hat,
                              const std::vector<double>& theta) {
  if (decisions.size() != t.size() || theta_hat.size() != t.size() || theta.size() != t.size())
    throw std::invalid_argument("metric_sensing: shape mismatch");
  SensingMetrics m;
  std::size_t n1 = 0, n0 = 0, d1 = 0, d0 = 0;
  std::vector<double> sq, err;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i]) {
      ++n1;
      d1 += decisions[i] ? 1 : 0;
      const double e = theta_hat[i] - theta[i];
      sq.push_back(e * e);
      err.push_back(e);
    } else {
      ++n0;
      d0 += decisions[i] ? 1 : 0;
    }
  }
  m.p_d = n1 ? static_cast<double>(d1) / static_cast<double>(n1) : 0.0;
  m.p_f = n0 ? static_cast<double>(d0) / static_cast<double>(n0) : 0.0;
  if (n1) {
    m.rmse_rad = std::sqrt(pairwise_sum(sq) / static_cast<double>(n1));
    m.bias_rad = pairwise_sum(err) / static_cast<double>(n1);
  }
  return m;
}

}  // namespace jcas
