#pragma once

#include <cstdint>
#include <vector>

#include "jcas/cmat.hpp"
#include "jcas/constellation.hpp"
#include "jcas/rng.hpp"

namespace jcas {

/// Angular interval in radians, inside (-pi/2, pi/2).
struct AngleArea {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double a) const { return a >= lo && a <= hi; }
};

/// Static description of one simulated deployment.
struct ScenarioConfig {
  std::size_t k_antennas = 16;
  std::size_t mod_order = 16;
  AngleArea comm_area{30.0 * M_PI / 180.0, 50.0 * M_PI / 180.0};
  AngleArea sens_area{-20.0 * M_PI / 180.0, 20.0 * M_PI / 180.0};
  double sigma_c2 = 1.0;    // communication tap variance
  double sigma_s2 = 1.0;    // radar cross-section variance
  double sigma_nc2 = 0.1;   // communication noise variance (eval default)
  double sigma_ns2 = 1.0;   // sensing noise variance (eval default)
  std::size_t n_win_max = 15;
  double target_prior = 0.5;
  double p_false_alarm = 0.01;

  void validate() const;
};

/// One Monte-Carlo scenario: everything random that a single observation
/// window depends on.
struct FrameBatch {
  int n_win = 1;
  double phi = 0.0;            // UE angle, constant over the window
  double theta = 0.0;          // target angle, constant over the window
  bool target = false;
  double sigma_ns2 = 1.0;
  double sigma_nc2 = 1.0;
  std::vector<int> symbols;            // n_win indices into the alphabet
  std::vector<std::uint8_t> bits;      // log2(M) * n_win
  CVec alpha_c;                        // n_win taps, CN(0, sigma_c2), iid per snapshot
  CVec alpha_s;                        // n_win taps, CN(0, sigma_s2), iid per snapshot
  CVec noise_c;                        // n_win samples, CN(0, sigma_nc2)
  CMat noise_s;                        // K x n_win, CN(0, sigma_ns2)
};

/// Draws one window. Angles uniform in their areas, target Bernoulli, taps
/// and noise per snapshot.
FrameBatch make_frame(const ScenarioConfig& cfg, const Constellation& alphabet, int n_win,
                      double sigma_ns2, double sigma_nc2, RngStream& rng);

struct PrecodingVector {
  CVec v;  // K complex weights, ||v||^2 = 1
};

/// Steering vector a_k = exp(j*pi*k*sin(theta)), k = 0..K-1 (half-wavelength ULA).
CVec steering_vector(double theta, std::size_t k_antennas);

/// Transmit frame Y = v (outer) x, Y[k][n] = v_k * x_n.
CMat transmit(const CVec& symbols, const PrecodingVector& v);

struct CommOutput {
  CVec z;      // received samples at the UE
  CVec gamma;  // perfect CSI: (v^T a(phi)) * alpha_c[n]
};

/// Single-antenna receiver behind a one-tap Rayleigh channel:
/// z[n] = a(phi)^T Y[:,n] * alpha_c[n] + noise[n], together with the perfect
/// CSI gamma[n] = (v^T a(phi)) * alpha_c[n] that the demapper is handed.
CommOutput comm_channel(const CMat& y, const PrecodingVector& v, double phi, const CVec& alpha_c,
                        const CVec& noise);

/// Monostatic echo: Z = T * a(theta) a(theta)^T Y diag(alpha_s) + N.
CMat sensing_channel(const CMat& y, double theta, bool target, const CVec& alpha_s,
                     const CMat& noise);

/// |v^T a(theta)|^2 for each grid angle.
std::vector<double> beam_pattern(const PrecodingVector& v, const std::vector<double>& grid);

/// Uniform angle grid over (-pi/2, pi/2), step in radians.
std::vector<double> angle_grid(double step);

struct PowerFractions {
  double sensing = 0.0;
  double comm = 0.0;
  double outside = 0.0;
};

/// Shares of radiated power falling into the two areas of interest,
/// integrated on a uniform angle grid.
PowerFractions area_power_fractions(const PrecodingVector& v, const ScenarioConfig& cfg,
                                    double grid_step);

/// Mean beam gain over an angular area (uniform grid).
double avg_beam_gain(const PrecodingVector& v, const AngleArea& area, double grid_step);

}  // namespace jcas
