#pragma once

#include <vector>

#include "jcas/cmat.hpp"
#include "jcas/constellation.hpp"
#include "jcas/mlp.hpp"

namespace jcas {

/// Per-bit log-likelihood ratios, ell = ln p(b=0|z) - ln p(b=1|z):
/// positive means bit 0 is more likely, hard decision b = (ell < 0).
struct LlrFrame {
  std::size_t bits_per_symbol = 0;
  std::size_t n_win = 0;
  std::vector<double> llr;  // row-major: bit position x symbol

  double& at(std::size_t bit, std::size_t sym) { return llr[bit * n_win + sym]; }
  double at(std::size_t bit, std::size_t sym) const { return llr[bit * n_win + sym]; }
};

struct MmseOutput {
  cplx x_eq{0.0, 0.0};
  double snr_post = 0.0;
};

/// x_eq = conj(gamma) z / (|gamma|^2 + sigma_nc2); gamma = 0 gives a zero
/// estimate rather than an error.
MmseOutput mmse_equalize(cplx z, cplx gamma, double sigma_nc2);

/// Residual error variance of the equalized symbol,
/// sigma^2 / (|gamma|^2 + sigma^2). Equal to 1 for a dead channel.
double post_eq_noise_var(cplx gamma, double sigma_nc2);

/// Network inputs for one equalized symbol: (Re x_eq, Im x_eq, log10 of the
/// post-equalization noise variance).
std::vector<double> demapper_inputs(cplx x_eq, cplx gamma, double sigma_nc2);

/// Trained-demapper LLRs for one symbol.
std::vector<double> demap_nn(const Mlp& net, cplx x_eq, cplx gamma, double sigma_nc2);

/// Exact max-likelihood LLRs, log-sum-exp accumulated:
/// ell_i = ln sum_{x: b_i=0} exp(-|z - gamma x|^2/sigma^2) - ln sum_{x: b_i=1} ...
std::vector<double> demap_mld(const Constellation& c, cplx z, cplx gamma, double sigma_nc2);

/// Hard decision: bit = 1 iff ell < 0 (ties resolve to 0).
std::vector<std::uint8_t> harden(const std::vector<double>& llrs);

}  // namespace jcas
