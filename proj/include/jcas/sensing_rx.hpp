#pragma once

#include <vector>

#include "jcas/cmat.hpp"
#include "jcas/mlp.hpp"

namespace jcas {

/// K x K Hermitian PSD short-term spatial autocorrelation.
using CorrelationMatrix = CMat;

struct DetectionResult {
  double score = 0.0;   // raw network output, before the offset sigmoid
  double p_target = 0.5;
  bool decision = false;  // p_target > 0.5
  bool calibrated = false;  // false when no threshold was available (tau = 0)
};

/// Corr(Z, Z) = (1/N_win) Z Z^H.
CorrelationMatrix correlate(const CMat& z_s);

/// Flattens corr/sigma_ns2 into real features followed by the two scalar
/// inputs (N_win/15, log10 sigma_ns2). Length 2*K^2 + 2.
std::vector<double> sensing_features(const CorrelationMatrix& corr, int n_win, double sigma_ns2);

/// Detection probability p = sigma(score + tau) using the threshold
/// calibrated for this window length (tau = 0 + warning flag when absent).
DetectionResult detect(const Mlp& net, const std::vector<double>& features, double tau,
                       bool tau_calibrated = true);

/// Bounded AoA estimate in [-pi/2, pi/2] from the scaled-tanh head.
double estimate_aoa(const Mlp& net, const std::vector<double>& features);

/// Offset tau = -q where q is the empirical (1-P_f)-quantile of noise-only
/// raw scores (order statistic at ceil((1-P_f)*n), no interpolation).
struct ThresholdResult {
  double tau = 0.0;
  bool degenerate = false;  // all scores equal
  bool enough_scores = true;  // at least 1/P_f samples supplied
};
ThresholdResult calibrate_threshold(const std::vector<double>& noise_only_scores, double p_f);

/// Sufficient statistic eta = Z y^H / sqrt(N_win) for known transmit frame y.
CMat sufficient_statistic(const CMat& z_s, const CMat& y);

/// Transmit-agnostic approximation: identical to correlate(z_s).
CorrelationMatrix sufficient_statistic_approx(const CMat& z_s);

}  // namespace jcas
