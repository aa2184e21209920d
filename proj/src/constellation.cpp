#include "jcas/constellation.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace jcas {

namespace {

bool is_power_of_two(std::size_t m) { return m >= 2 && (m & (m - 1)) == 0; }

std::size_t log2_exact(std::size_t m) {
  std::size_t c = 0;
  while ((1u << c) < m) ++c;
  return c;
}

std::vector<std::uint8_t> bits_of(std::size_t value, std::size_t width) {
  std::vector<std::uint8_t> b(width);
  for (std::size_t i = 0; i < width; ++i) b[i] = (value >> (width - 1 - i)) & 1u;
  return b;
}

std::size_t gray(std::size_t v) { return v ^ (v >> 1); }

void normalize_power(std::vector<std::complex<double>>& pts) {
  double p = 0.0;
  for (const auto& z : pts) p += std::norm(z);
  p /= static_cast<double>(pts.size());
  const double g = 1.0 / std::sqrt(p);
  for (auto& z : pts) z *= g;
}

}  // namespace

double Constellation::mean_power() const {
  double p = 0.0;
  for (const auto& z : points) p += std::norm(z);
  return p / static_cast<double>(points.size());
}

bool Constellation::is_degenerate(double tol) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      if (std::abs(points[i] - points[j]) < tol) return true;
  return false;
}

std::string Constellation::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "index,bits,re,im\n";
  for (std::size_t m = 0; m < order; ++m) {
    os << m << ",";
    for (auto b : bit_labels[m]) os << int(b);
    os << "," << points[m].real() << "," << points[m].imag() << "\n";
  }
  return os.str();
}

double ApskSpec::r1() const { return std::sqrt(2.0 - r2 * r2); }

Constellation make_qam(std::size_t m) {
  if (m != 4 && m != 16 && m != 64) throw std::invalid_argument("make_qam: order must be 4, 16 or 64");
  const std::size_t side = (m == 4) ? 2 : (m == 16 ? 4 : 8);
  const std::size_t axis_bits = log2_exact(side);

  Constellation c;
  c.order = m;
  c.points.resize(m);
  c.bit_labels.resize(m);
  // per-axis Gray labels, amplitude levels -(side-1), ..., +(side-1)
  for (std::size_t idx = 0; idx < m; ++idx) {
    const std::size_t gi = idx >> axis_bits;  // in-phase label
    const std::size_t gq = idx & (side - 1);  // quadrature label
    // invert the Gray code to find the level carrying this label
    std::size_t li = 0, lq = 0;
    for (std::size_t lvl = 0; lvl < side; ++lvl) {
      if (gray(lvl) == gi) li = lvl;
      if (gray(lvl) == gq) lq = lvl;
    }
    const double re = 2.0 * static_cast<double>(li) - (static_cast<double>(side) - 1.0);
    const double im = 2.0 * static_cast<double>(lq) - (static_cast<double>(side) - 1.0);
    c.points[idx] = {re, im};
    c.bit_labels[idx] = bits_of(idx, 2 * axis_bits);
  }
  normalize_power(c.points);
  return c;
}

Constellation make_psk(std::size_t m) {
  if (!is_power_of_two(m)) throw std::invalid_argument("make_psk: order must be a power of two >= 2");
  const std::size_t nbits = log2_exact(m);
  Constellation c;
  c.order = m;
  c.points.resize(m);
  c.bit_labels.resize(m);
  for (std::size_t idx = 0; idx < m; ++idx) {
    // label idx sits at the position whose Gray code equals idx
    std::size_t pos = 0;
    for (std::size_t k = 0; k < m; ++k)
      if (gray(k) == idx) pos = k;
    const double ang = 2.0 * M_PI * static_cast<double>(pos) / static_cast<double>(m);
    c.points[idx] = {std::cos(ang), std::sin(ang)};
    c.bit_labels[idx] = bits_of(idx, nbits);
  }
  return c;
}

Constellation make_apsk(const ApskSpec& spec) {
  if (spec.order != 16) throw std::invalid_argument("make_apsk: order must be 16");
  if (spec.r2 < 0.0 || spec.r2 > 1.0) throw std::invalid_argument("make_apsk: r2 must be in [0, 1]");
  const double r1 = spec.r1();
  const double offset = 2.0 * M_PI / static_cast<double>(spec.order);

  Constellation c;
  c.order = spec.order;
  c.points.resize(spec.order);
  c.bit_labels.resize(spec.order);
  for (std::size_t k = 0; k < 8; ++k) {
    const double base = 2.0 * M_PI * static_cast<double>(k) / 8.0;
    c.points[k] = {spec.r2 * std::cos(base), spec.r2 * std::sin(base)};
    c.points[8 + k] = {r1 * std::cos(base + offset), r1 * std::sin(base + offset)};
  }
  for (std::size_t idx = 0; idx < spec.order; ++idx) c.bit_labels[idx] = bits_of(idx, 4);
  normalize_power(c.points);  // exact up to rounding; r1^2 + r2^2 = 2 already
  return c;
}

Constellation constellation_from_points(std::vector<std::complex<double>> points) {
  if (!is_power_of_two(points.size()))
    throw std::invalid_argument("constellation_from_points: size must be a power of two >= 2");
  Constellation c;
  c.order = points.size();
  normalize_power(points);
  c.points = std::move(points);
  c.bit_labels.resize(c.order);
  const std::size_t nbits = log2_exact(c.order);
  for (std::size_t idx = 0; idx < c.order; ++idx) c.bit_labels[idx] = bits_of(idx, nbits);
  return c;
}

double kurtosis(const Constellation& c) {
  double s = 0.0;
  for (const auto& z : c.points) {
    const double p = std::norm(z);
    s += p * p;
  }
  return s / static_cast<double>(c.points.size());
}

double mean_min_distance(const Constellation& c) {
  if (c.order < 2) throw std::invalid_argument("mean_min_distance: need at least two points");
  double acc = 0.0;
  for (std::size_t i = 0; i < c.order; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.order; ++j) {
      if (i == j) continue;
      best = std::min(best, std::abs(c.points[i] - c.points[j]));
    }
    acc += best;
  }
  return acc / static_cast<double>(c.order);
}

DminResult dmin_from_kappa(double kappa, std::size_t m) {
  if (kappa < 1.0) throw std::invalid_argument("dmin_from_kappa: kurtosis below 1 is impossible");
  if (kappa > 2.0) throw std::invalid_argument("dmin_from_kappa: two-ring alphabet caps kurtosis at 2");
  const double ang = 2.0 * M_PI / static_cast<double>(m);
  const double r1r2 = std::sqrt(2.0 - kappa);
  DminResult out;
  out.dmin = std::sqrt(std::max(0.0, 2.0 - 2.0 * r1r2 * std::cos(ang)));
  // inner radius from kappa: r2^2 = 1 - sqrt(kappa - 1)
  const double r2 = std::sqrt(std::max(0.0, 1.0 - std::sqrt(std::max(0.0, kappa - 1.0))));
  out.valid = out.dmin <= 2.0 * r2 * std::sin(ang) + 1e-12;
  return out;
}

}  // namespace jcas
