#include "jcas/comm_rx.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jcas {

MmseOutput mmse_equalize(cplx z, cplx gamma, double sigma_nc2) {
  if (sigma_nc2 <= 0.0) throw std::invalid_argument("mmse_equalize: sigma_nc2 must be positive");
  const double g2 = std::norm(gamma);
  MmseOutput out;
  out.x_eq = std::conj(gamma) * z / (g2 + sigma_nc2);
  out.snr_post = g2 / sigma_nc2;
  return out;
}

double post_eq_noise_var(cplx gamma, double sigma_nc2) {
  return sigma_nc2 / (std::norm(gamma) + sigma_nc2);
}

std::vector<double> demapper_inputs(cplx x_eq, cplx gamma, double sigma_nc2) {
  return {x_eq.real(), x_eq.imag(), std::log10(post_eq_noise_var(gamma, sigma_nc2))};
}

std::vector<double> demap_nn(const Mlp& net, cplx x_eq, cplx gamma, double sigma_nc2) {
  RealMat batch(1, 3);
  batch.a = demapper_inputs(x_eq, gamma, sigma_nc2);
  Tape tape = mlp_forward(net, std::move(batch));
  return tape.head_out.a;
}

std::vector<double> demap_mld(const Constellation& c, cplx z, cplx gamma, double sigma_nc2) {
  if (sigma_nc2 <= 0.0) throw std::invalid_argument("demap_mld: sigma_nc2 must be positive");
  const std::size_t nbits = c.bits_per_symbol();

  // per-symbol log metrics
  std::vector<double> metric(c.order);
  double mmax = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < c.order; ++m) {
    metric[m] = -std::norm(z - gamma * c.points[m]) / sigma_nc2;
    mmax = std::max(mmax, metric[m]);
  }

  std::vector<double> llrs(nbits);
  for (std::size_t i = 0; i < nbits; ++i) {
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t m = 0; m < c.order; ++m) {
      const double e = std::exp(metric[m] - mmax);
      if (c.bit_labels[m][i])
        s1 += e;
      else
        s0 += e;
    }
    // max subtraction cancels; guard empty sides (cannot happen for a
    // bijective labeling, but keep the log finite regardless)
    const double tiny = std::numeric_limits<double>::min();
    llrs[i] = std::log(std::max(s0, tiny)) - std::log(std::max(s1, tiny));
  }
  return llrs;
}

std::vector<std::uint8_t> harden(const std::vector<double>& llrs) {
  std::vector<std::uint8_t> bits(llrs.size());
  for (std::size_t i = 0; i < llrs.size(); ++i) bits[i] = llrs[i] < 0.0 ? 1 : 0;
  return bits;
}

}  // namespace jcas
