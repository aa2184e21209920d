#include "jcas/airlink.hpp"

#include <cmath>
#include <stdexcept>

namespace jcas {

void ScenarioConfig::validate() const {
  auto check_area = [](const AngleArea& a, const char* name) {
    if (!(a.lo < a.hi) || a.lo <= -M_PI / 2 || a.hi >= M_PI / 2)
      throw std::invalid_argument(std::string("ScenarioConfig: bad area ") + name);
  };
  check_area(comm_area, "comm_area");
  check_area(sens_area, "sens_area");
  if (k_antennas < 2) throw std::invalid_argument("ScenarioConfig: need at least 2 antennas");
  if (sigma_c2 <= 0 || sigma_s2 <= 0 || sigma_nc2 <= 0 || sigma_ns2 <= 0)
    throw std::invalid_argument("ScenarioConfig: variances must be positive");
  if (n_win_max < 1) throw std::invalid_argument("ScenarioConfig: n_win_max must be >= 1");
  if (target_prior < 0 || target_prior > 1)
    throw std::invalid_argument("ScenarioConfig: target_prior must be in [0,1]");
  if (p_false_alarm <= 0 || p_false_alarm >= 1)
    throw std::invalid_argument("ScenarioConfig: p_false_alarm must be in (0,1)");
}

FrameBatch make_frame(const ScenarioConfig& cfg, const Constellation& alphabet, int n_win,
                      double sigma_ns2, double sigma_nc2, RngStream& rng) {
  FrameBatch f;
  f.n_win = n_win;
  f.sigma_ns2 = sigma_ns2;
  f.sigma_nc2 = sigma_nc2;
  f.phi = rng.uniform(cfg.comm_area.lo, cfg.comm_area.hi);
  f.theta = rng.uniform(cfg.sens_area.lo, cfg.sens_area.hi);
  f.target = rng.bernoulli(cfg.target_prior);

  const std::size_t nbits = alphabet.bits_per_symbol();
  f.symbols.resize(n_win);
  f.bits.resize(nbits * n_win);
  for (int n = 0; n < n_win; ++n) {
    const std::size_t idx = rng.uniform_int(alphabet.order);
    f.symbols[n] = static_cast<int>(idx);
    for (std::size_t b = 0; b < nbits; ++b) f.bits[n * nbits + b] = alphabet.bit_labels[idx][b];
  }

  f.alpha_c = sample_cnormal(rng, {0.0, 0.0}, cfg.sigma_c2, n_win);
  f.alpha_s = sample_cnormal(rng, {0.0, 0.0}, cfg.sigma_s2, n_win);
  f.noise_c = sample_cnormal(rng, {0.0, 0.0}, sigma_nc2, n_win);
  f.noise_s = CMat(cfg.k_antennas, n_win);
  for (std::size_t k = 0; k < cfg.k_antennas; ++k)
    for (int n = 0; n < n_win; ++n) f.noise_s(k, n) = rng.cnormal({0.0, 0.0}, sigma_ns2);
  return f;
}

CVec steering_vector(double theta, std::size_t k_antennas) {
  CVec a(k_antennas);
  const double w = M_PI * std::sin(theta);
  for (std::size_t k = 0; k < k_antennas; ++k)
    a[k] = {std::cos(w * static_cast<double>(k)), std::sin(w * static_cast<double>(k))};
  return a;
}

CMat transmit(const CVec& symbols, const PrecodingVector& v) {
  CMat y(v.v.size(), symbols.size());
  for (std::size_t k = 0; k < v.v.size(); ++k)
    for (std::size_t n = 0; n < symbols.size(); ++n) y(k, n) = v.v[k] * symbols[n];
  return y;
}

CommOutput comm_channel(const CMat& y, const PrecodingVector& v, double phi, const CVec& alpha_c,
                        const CVec& noise) {
  if (alpha_c.size() != y.cols() || noise.size() != y.cols())
    throw std::invalid_argument("comm_channel: tap/noise length must match frame length");
  if (v.v.size() != y.rows())
    throw std::invalid_argument("comm_channel: precoder length must match antenna count");
  const CVec a = steering_vector(phi, y.rows());
  cplx va = 0.0;  // v^T a(phi), the per-window beam response toward the UE
  for (std::size_t k = 0; k < y.rows(); ++k) va += v.v[k] * a[k];
  CommOutput out;
  out.z.resize(y.cols());
  out.gamma.resize(y.cols());
  for (std::size_t n = 0; n < y.cols(); ++n) {
    cplx s = 0.0;
    for (std::size_t k = 0; k < y.rows(); ++k) s += a[k] * y(k, n);
    out.z[n] = s * alpha_c[n] + noise[n];
    out.gamma[n] = va * alpha_c[n];
  }
  return out;
}

CMat sensing_channel(const CMat& y, double theta, bool target, const CVec& alpha_s,
                     const CMat& noise) {
  if (noise.rows() != y.rows() || noise.cols() != y.cols())
    throw std::invalid_argument("sensing_channel: noise shape must match frame");
  if (alpha_s.size() != y.cols())
    throw std::invalid_argument("sensing_channel: tap count must match frame length");
  CMat z = noise;
  if (!target) return z;
  const CVec a = steering_vector(theta, y.rows());
  // a(theta) a(theta)^T Y diag(alpha): contract a^T Y once
  CVec row(y.cols(), cplx{0.0, 0.0});
  for (std::size_t n = 0; n < y.cols(); ++n) {
    cplx s = 0.0;
    for (std::size_t k = 0; k < y.rows(); ++k) s += a[k] * y(k, n);
    row[n] = s * alpha_s[n];
  }
  for (std::size_t k = 0; k < y.rows(); ++k)
    for (std::size_t n = 0; n < y.cols(); ++n) z(k, n) += a[k] * row[n];
  return z;
}

std::vector<double> beam_pattern(const PrecodingVector& v, const std::vector<double>& grid) {
  std::vector<double> p(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const CVec a = steering_vector(grid[g], v.v.size());
    cplx s = 0.0;
    for (std::size_t k = 0; k < v.v.size(); ++k) s += v.v[k] * a[k];
    p[g] = std::norm(s);
  }
  return p;
}

std::vector<double> angle_grid(double step) {
  if (step <= 0.0) throw std::invalid_argument("angle_grid: step must be positive");
  std::vector<double> g;
  for (double a = -M_PI / 2 + step / 2; a < M_PI / 2; a += step) g.push_back(a);
  return g;
}

PowerFractions area_power_fractions(const PrecodingVector& v, const ScenarioConfig& cfg,
                                    double grid_step) {
  const auto grid = angle_grid(grid_step);
  const auto p = beam_pattern(v, grid);
  double total = 0.0, sens = 0.0, comm = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    total += p[g];
    if (cfg.sens_area.contains(grid[g])) sens += p[g];
    if (cfg.comm_area.contains(grid[g])) comm += p[g];
  }
  PowerFractions out;
  if (total > 0.0) {
    out.sensing = sens / total;
    out.comm = comm / total;
    out.outside = 1.0 - out.sensing - out.comm;
  }
  return out;
}

double avg_beam_gain(const PrecodingVector& v, const AngleArea& area, double grid_step) {
  if (!(area.lo <= area.hi)) throw std::invalid_argument("avg_beam_gain: empty area");
  std::vector<double> grid;
  if (area.lo == area.hi) {
    grid.push_back(area.lo);
  } else {
    const int n = std::max(1, static_cast<int>(std::ceil(area.width() / grid_step)));
    for (int i = 0; i < n; ++i)
      grid.push_back(area.lo + (static_cast<double>(i) + 0.5) * area.width() / n);
  }
  const auto p = beam_pattern(v, grid);
  double s = 0.0;
  for (double x : p) s += x;
  return s / static_cast<double>(p.size());
}

}  // namespace jcas
