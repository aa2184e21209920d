#pragma once

// Shared forward/adjoint glue between the single-user and multi-user
// training pipelines. Complex adjoints follow the convention
// zdot = dL/d(Re z) + j dL/d(Im z), which gives the product rules
//   w = u v   ->  udot += conj(v) wdot,  vdot += conj(u) wdot
//   r = |z|^2 ->  zdot += 2 z rdot      (rdot real)

#include <cmath>
#include <span>

#include "jcas/cmat.hpp"

namespace jcas::detail {

/// Adjoint of the chain features -> Corr -> Z restricted to the signal row:
/// for Z[k][n] = T a_k row_n alpha_n + N[k][n], returns rowdot (length N).
/// `fdot` holds dL/d(features); only the 2K^2 matrix entries are consumed.
inline CVec sensing_row_adjoint(const CMat& z, const CVec& a, const CVec& alpha,
                                std::span<const double> fdot, double sigma_ns2) {
  const std::size_t k = z.rows();
  const std::size_t n = z.cols();
  // Cdot entries from the feature layout (Re, Im) interleaved, scaled by the
  // 1/sigma^2 normalization of the features
  CMat cdot(k, k);
  const double inv = 1.0 / sigma_ns2;
  std::size_t at = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      cdot(i, j) = cplx{fdot[at], fdot[at + 1]} * inv;
      at += 2;
    }
  // Zdot = (Cdot + Cdot^H) Z / n ; we only need a^H Zdot, so contract first:
  // r_j = sum_i conj(a_i) (Cdot + Cdot^H)(i, j)
  CVec r(k, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < k; ++i) {
    const cplx ai = std::conj(a[i]);
    for (std::size_t j = 0; j < k; ++j) r[j] += ai * (cdot(i, j) + std::conj(cdot(j, i)));
  }
  CVec rowdot(n, cplx{0.0, 0.0});
  const double invn = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    cplx s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += r[j] * z(j, t);
    rowdot[t] = std::conj(alpha[t]) * s * invn;
  }
  return rowdot;
}

/// Forward state of the equalizer for one symbol. nu_eff is the variance of
/// everything the equalizer treats as noise (thermal, plus interference in
/// the multi-user case).
struct EqForward {
  cplx gamma{0.0, 0.0};
  cplx z{0.0, 0.0};
  cplx s1{0.0, 0.0};  // conj(gamma) * z
  double q = 0.0;     // |gamma|^2
  double nu = 0.0;    // nu_eff
  double gfac = 0.0;  // 1 / (q + nu)
  cplx x_eq{0.0, 0.0};
  double u3 = 0.0;  // log10(nu / (q + nu))
};

inline EqForward mmse_forward(cplx gamma, cplx z, double nu_eff) {
  EqForward f;
  f.gamma = gamma;
  f.z = z;
  f.q = std::norm(gamma);
  f.nu = nu_eff;
  f.gfac = 1.0 / (f.q + f.nu);
  f.s1 = std::conj(gamma) * z;
  f.x_eq = f.s1 * f.gfac;
  f.u3 = std::log10(f.nu * f.gfac);
  return f;
}

struct EqAdjoint {
  cplx gamma_dot{0.0, 0.0};
  cplx z_dot{0.0, 0.0};
  double nu_dot = 0.0;
};

/// Adjoint of mmse_forward given dL/d(x_eq) and dL/d(u3).
inline EqAdjoint mmse_backward(const EqForward& f, cplx edot, double u3dot) {
  static const double kLn10 = std::log(10.0);
  EqAdjoint adj;
  const cplx s1dot = f.gfac * edot;
  const double gdot = (std::conj(f.s1) * edot).real();
  adj.z_dot = f.gamma * s1dot;
  adj.gamma_dot = f.z * std::conj(s1dot);
  double qdot = -f.gfac * f.gfac * gdot;
  adj.nu_dot = -f.gfac * f.gfac * gdot;
  // u3 = (ln nu - ln(q + nu)) / ln 10
  qdot += -u3dot * f.gfac / kLn10;
  adj.nu_dot += u3dot * (1.0 / f.nu - f.gfac) / kLn10;
  adj.gamma_dot += 2.0 * f.gamma * qdot;
  return adj;
}

}  // namespace jcas::detail
