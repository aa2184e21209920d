#include "jcas/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace jcas {

namespace {

double max_hermitian_defect(const CMat& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

}  // namespace

EigResult hermitian_eig(const CMat& m) {
  if (m.rows() != m.cols() || m.empty())
    throw std::invalid_argument("hermitian_eig: matrix must be square and nonempty");
  const std::size_t n = m.rows();
  const double norm = m.frobenius_norm();
  if (max_hermitian_defect(m) > 1e-10 * std::max(norm, 1e-300))
    throw std::invalid_argument("hermitian_eig: input is not Hermitian");

  // work on the symmetrized copy; rounding defects below tolerance are folded in
  CMat a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
  CMat v = CMat::identity(n);

  const double tol = 1e-14 * std::max(norm, 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= tol) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= tol / static_cast<double>(n)) continue;

        // absorb the phase so the 2x2 block becomes real symmetric, then a
        // classical Jacobi rotation
        const cplx phase = apq / mag;  // e^{j phi}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // J[p][p]=c, J[p][q]=s, J[q][p]=-s*conj(phase), J[q][q]=c*conj(phase)
        const cplx jqp = -s * std::conj(phase);
        const cplx jqq = c * std::conj(phase);

        for (std::size_t i = 0; i < n; ++i) {
          const cplx aip = a(i, p);
          const cplx aiq = a(i, q);
          a(i, p) = aip * c + aiq * jqp;
          a(i, q) = aip * s + aiq * jqq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const cplx api = a(p, i);
          const cplx aqi = a(q, i);
          a(p, i) = c * api + std::conj(jqp) * aqi;
          a(q, i) = s * api + std::conj(jqq) * aqi;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        for (std::size_t i = 0; i < n; ++i) {
          const cplx vip = v(i, p);
          const cplx viq = v(i, q);
          v(i, p) = vip * c + viq * jqp;
          v(i, q) = vip * s + viq * jqq;
        }
      }
    }
  }

  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = a(i, i).real();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return vals[x] > vals[y]; });

  EigResult out;
  out.values.resize(n);
  out.vectors = CMat(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = vals[order[k]];
    double len = 0.0;
    for (std::size_t i = 0; i < n; ++i) len += std::norm(v(i, order[k]));
    len = std::sqrt(len);
    const double inv = len > 0.0 ? 1.0 / len : 0.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]) * inv;
  }
  return out;
}

std::vector<double> singular_values(const CMat& m) {
  if (m.empty()) return {};
  // Jordan-Wielandt embedding [[0, A], [A^H, 0]] has eigenvalues +-sigma_i;
  // avoids the precision loss of squaring into a Gram matrix
  const std::size_t r = m.rows(), c = m.cols();
  CMat h(r + c, r + c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      h(i, r + j) = m(i, j);
      h(r + j, i) = std::conj(m(i, j));
    }
  EigResult eig = hermitian_eig(h);  // descending; top min(r,c) are the sigmas
  const std::size_t k = std::min(r, c);
  std::vector<double> sv(k);
  for (std::size_t i = 0; i < k; ++i) sv[i] = std::max(0.0, eig.values[i]);
  return sv;
}

CMat pseudo_inverse(const CMat& m) {
  if (m.empty()) throw std::invalid_argument("pseudo_inverse: empty matrix");
  const bool tall = m.rows() >= m.cols();
  const CMat g = tall ? m.adjoint() * m : m * m.adjoint();
  EigResult eig = hermitian_eig(g);
  const std::size_t k = g.rows();

  const double smax = std::sqrt(std::max(0.0, eig.values.empty() ? 0.0 : eig.values[0]));
  const double cutoff = smax * std::max(m.rows(), m.cols()) * 1e-14;

  // inv_g_pinv = V diag(1/lambda) V^H restricted to the numerical rank
  CMat ginv(k, k);
  for (std::size_t idx = 0; idx < k; ++idx) {
    const double lam = eig.values[idx];
    if (lam <= 0.0 || std::sqrt(lam) <= cutoff) continue;
    const double w = 1.0 / lam;
    for (std::size_t i = 0; i < k; ++i) {
      const cplx vi = eig.vectors(i, idx);
      for (std::size_t j = 0; j < k; ++j) ginv(i, j) += w * vi * std::conj(eig.vectors(j, idx));
    }
  }
  // tall: pinv = (m^H m)^+ m^H ; wide: pinv = m^H (m m^H)^+
  return tall ? ginv * m.adjoint() : m.adjoint() * ginv;
}

}  // namespace jcas
