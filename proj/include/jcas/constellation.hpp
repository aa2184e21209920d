#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace jcas {

/// Modulation alphabet with a fixed symbol-index-to-bits mapping.
/// Always normalized to unit mean power.
struct Constellation {
  std::size_t order = 0;                        // M, power of two
  std::vector<std::complex<double>> points;     // M symbols
  std::vector<std::vector<std::uint8_t>> bit_labels;  // M labels of length log2(M)

  std::size_t bits_per_symbol() const { return bit_labels.empty() ? 0 : bit_labels[0].size(); }
  double mean_power() const;
  /// True when two points (nearly) coincide; such alphabets cannot carry data.
  bool is_degenerate(double tol = 1e-9) const;
  /// Rows of (index, bits, re, im) for export.
  std::string to_csv() const;
};

/// Two-ring 16-point alphabet: 8 points on the inner radius r2, 8 on the
/// outer radius sqrt(2 - r2^2), rings rotated against each other by 2*pi/M.
struct ApskSpec {
  std::size_t order = 16;
  double r2 = 1.0;
  double r1() const;
};

Constellation make_qam(std::size_t m);
Constellation make_psk(std::size_t m);
Constellation make_apsk(const ApskSpec& spec);

/// Builds a constellation from raw points (e.g. a trained modulator output):
/// normalizes to unit mean power and attaches natural-binary labels.
Constellation constellation_from_points(std::vector<std::complex<double>> points);

/// Fourth standardized moment (1/M) sum |x|^4 of the unit-power alphabet.
double kurtosis(const Constellation& c);

/// (1/M) sum_m min_{n != m} |x_n - x_m|.
double mean_min_distance(const Constellation& c);

struct DminResult {
  double dmin = 0.0;
  bool valid = false;  // whether the closed form applies at this kurtosis
};

/// Closed-form mean minimum distance of the two-ring alphabet with kurtosis
/// kappa: the distance between phase-adjacent points of opposite rings,
/// d = sqrt(2 - 2*r1*r2*cos(2*pi/M)) with r1*r2 = sqrt(2 - kappa).
/// Valid while d does not exceed the inner-ring chord 2*r2*sin(2*pi/M).
DminResult dmin_from_kappa(double kappa, std::size_t m);

}  // namespace jcas
