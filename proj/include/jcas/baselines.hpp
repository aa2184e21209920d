#pragma once

#include "jcas/cmat.hpp"
#include "jcas/sensing_rx.hpp"

namespace jcas {

/// Parameters entering the angle-estimation variance bound.
struct CrbParams {
  std::size_t k_antennas = 16;
  int n_win = 1;
  double sigma_ns2 = 1.0;
  double beam_gain = 1.0;   // beam gain toward the target
  double sigma_s2 = 1.0;    // reflection variance
  double theta = 0.0;

  void validate() const;
};

struct NpDetection {
  double statistic = 0.0;
  double threshold = 0.0;
  bool decision = false;
};

/// Generalized power detector: (2/sigma_ns2) * sum |z|^2 against the
/// chi-squared quantile with 2*K*N_win degrees of freedom at 1 - P_f.
NpDetection np_detector(const CMat& z_s, double sigma_ns2, double p_f);

struct EspritResult {
  double theta = 0.0;
  bool degenerate = false;  // rotation fell outside the visible region
};

/// Single-target ESPRIT on the spatial autocorrelation: dominant eigenvector,
/// subarray shift one, least-squares rotation, theta = arcsin(arg/pi).
EspritResult esprit_aoa(const CorrelationMatrix& corr);

/// Closed-form variance bound:
///   C = 1/(pi^2 cos^2 theta) * sigma_ns2/(2 N)
///       * ( beta sigma_s2 * [K beta sigma_s2 / (sigma_ns2 + K beta sigma_s2)]
///           * (K^3 - K)/12 )^-1
double crb_full(const CrbParams& p);

/// High-SNR simplification (valid when sigma_ns2 << K beta sigma_s2):
///   C ~= 1/(pi^2 cos^2 theta) * sigma_ns2/N * 1/(beta sigma_s2) * 6/(K^3 - K)
double crb_simplified(const CrbParams& p);

/// Independent numeric route to the same bound: steering derivative by
/// central differences, projector form of the curvature term, then the same
/// scalar assembly. Default step 1e-5.
double fisher_info_oracle(const CrbParams& p, double h = 1e-5);

/// Curvature term of the oracle alone (closed form is (K^3 - K)/12).
double fisher_h_numeric(std::size_t k_antennas, double theta, double h = 1e-5);

}  // namespace jcas
