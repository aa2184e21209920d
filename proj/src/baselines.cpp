#include "jcas/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "jcas/linalg.hpp"
#include "jcas/special.hpp"

namespace jcas {

void CrbParams::validate() const {
  if (k_antennas < 2) throw std::invalid_argument("CrbParams: need at least 2 antennas");
  if (n_win < 1) throw std::invalid_argument("CrbParams: n_win must be >= 1");
  if (sigma_ns2 <= 0 || sigma_s2 <= 0) throw std::invalid_argument("CrbParams: variances must be positive");
  if (beam_gain < 0) throw std::invalid_argument("CrbParams: beam gain must be nonnegative");
  if (!(std::abs(theta) < M_PI / 2)) throw std::invalid_argument("CrbParams: |theta| must be < pi/2");
}

NpDetection np_detector(const CMat& z_s, double sigma_ns2, double p_f) {
  if (sigma_ns2 <= 0.0) throw std::invalid_argument("np_detector: sigma_ns2 must be positive");
  if (p_f <= 0.0 || p_f >= 1.0) throw std::invalid_argument("np_detector: P_f must be in (0,1)");
  NpDetection out;
  double acc = 0.0;
  for (const auto& z : z_s.entries()) acc += std::norm(z);
  out.statistic = 2.0 * acc / sigma_ns2;
  out.threshold = chi2_quantile(2 * z_s.rows() * z_s.cols(), 1.0 - p_f);
  out.decision = out.statistic > out.threshold;
  return out;
}

EspritResult esprit_aoa(const CorrelationMatrix& corr) {
  if (corr.rows() < 2) throw std::invalid_argument("esprit_aoa: need at least 2 antennas");
  const EigResult eig = hermitian_eig(corr);
  const std::size_t k = corr.rows();

  // least-squares rotation between the shifted subarrays of the dominant
  // eigenvector: psi = arg(u1^H u2)
  cplx dot = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) dot += std::conj(eig.vectors(i, 0)) * eig.vectors(i + 1, 0);

  EspritResult out;
  if (std::abs(dot) == 0.0) {
    out.theta = 0.0;
    out.degenerate = true;
    return out;
  }
  const double psi = std::arg(dot);
  double s = psi / M_PI;
  if (s > 1.0 || s < -1.0) {
    s = std::clamp(s, -1.0, 1.0);
    out.degenerate = true;
  }
  out.theta = std::asin(s);
  return out;
}

double crb_full(const CrbParams& p) {
  p.validate();
  if (p.beam_gain == 0.0) throw std::invalid_argument("crb_full: zero beam gain makes the bound infinite");
  const double k = static_cast<double>(p.k_antennas);
  const double cos2 = std::cos(p.theta) * std::cos(p.theta);
  if (cos2 == 0.0) throw std::invalid_argument("crb_full: singular at theta = +-pi/2");
  const double sf = p.beam_gain * p.sigma_s2;
  const double inner = sf * (k * sf / (p.sigma_ns2 + k * sf)) * (k * k * k - k) / 12.0;
  return (1.0 / (M_PI * M_PI * cos2)) * (p.sigma_ns2 / (2.0 * static_cast<double>(p.n_win))) / inner;
}

double crb_simplified(const CrbParams& p) {
  p.validate();
  if (p.beam_gain == 0.0)
    throw std::invalid_argument("crb_simplified: zero beam gain makes the bound infinite");
  const double k = static_cast<double>(p.k_antennas);
  const double cos2 = std::cos(p.theta) * std::cos(p.theta);
  return (1.0 / (M_PI * M_PI * cos2)) * (p.sigma_ns2 / static_cast<double>(p.n_win)) /
         (p.beam_gain * p.sigma_s2) * 6.0 / (k * k * k - k);
}

namespace {

// phase-domain steering a_k(g) = exp(-j k g)
CVec steer_phase(std::size_t k, double g) {
  CVec a(k);
  for (std::size_t i = 0; i < k; ++i)
    a[i] = {std::cos(-g * static_cast<double>(i)), std::sin(-g * static_cast<double>(i))};
  return a;
}

}  // namespace

double fisher_h_numeric(std::size_t k_antennas, double theta, double h) {
  const double g = M_PI * std::sin(theta);
  const CVec ap = steer_phase(k_antennas, g + h);
  const CVec am = steer_phase(k_antennas, g - h);
  const CVec a = steer_phase(k_antennas, g);
  CVec da(k_antennas);
  for (std::size_t i = 0; i < k_antennas; ++i) da[i] = (ap[i] - am[i]) / (2.0 * h);

  // H = da^H (I - a (a^H a)^-1 a^H) da, built with the explicit projector
  const double kk = static_cast<double>(k_antennas);
  CMat proj = CMat::identity(k_antennas);
  for (std::size_t i = 0; i < k_antennas; ++i)
    for (std::size_t j = 0; j < k_antennas; ++j) proj(i, j) -= a[i] * std::conj(a[j]) / kk;

  cplx hval = 0.0;
  for (std::size_t i = 0; i < k_antennas; ++i) {
    cplx row = 0.0;
    for (std::size_t j = 0; j < k_antennas; ++j) row += proj(i, j) * da[j];
    hval += std::conj(da[i]) * row;
  }
  return hval.real();
}

double fisher_info_oracle(const CrbParams& p, double h) {
  p.validate();
  if (p.beam_gain == 0.0)
    throw std::invalid_argument("fisher_info_oracle: zero beam gain makes the bound infinite");
  const double k = static_cast<double>(p.k_antennas);
  const double cos2 = std::cos(p.theta) * std::cos(p.theta);
  const double sf = p.beam_gain * p.sigma_s2;
  const double hnum = fisher_h_numeric(p.k_antennas, p.theta, h);
  const double inner = sf * (k * sf / (p.sigma_ns2 + k * sf)) * hnum;
  return (1.0 / (M_PI * M_PI * cos2)) * (p.sigma_ns2 / (2.0 * static_cast<double>(p.n_win))) / inner;
}

}  // namespace jcas
