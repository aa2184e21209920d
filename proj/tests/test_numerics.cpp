#include <doctest.h>

#include <cmath>
#include <complex>

#include "jcas/cmat.hpp"
#include "jcas/linalg.hpp"
#include "jcas/rng.hpp"
#include "jcas/special.hpp"

using namespace jcas;

namespace {

CMat random_hermitian(std::size_t n, RngStream& rng) {
  CMat m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = rng.uniform(-2.0, 2.0);
    for (std::size_t j = i + 1; j < n; ++j) {
      m(i, j) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      m(j, i) = std::conj(m(i, j));
    }
  }
  return m;
}

double reconstruction_error(const CMat& m, const EigResult& eig) {
  const std::size_t n = m.rows();
  CMat rec(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        rec(i, j) += eig.values[k] * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
  return (rec - m).frobenius_norm();
}

}  // namespace

TEST_CASE("cnormal: zero variance collapses to the mean") {
  RngStream rng(1, 1);
  const auto draws = sample_cnormal(rng, {0.0, 0.0}, 0.0, 3);
  for (const auto& z : draws) CHECK(z == cplx{0.0, 0.0});
}

TEST_CASE("cnormal: mean squared magnitude matches the variance") {
  RngStream rng(7, 3);
  const std::size_t n = 100000;
  const auto draws = sample_cnormal(rng, {0.0, 0.0}, 2.0, n);
  double acc = 0.0;
  for (const auto& z : draws) acc += std::norm(z);
  acc /= static_cast<double>(n);
  CHECK(acc > 1.96);  // 3 sigma band around 2
  CHECK(acc < 2.04);

  // real and imaginary parts carry half the variance each
  double re2 = 0.0;
  for (const auto& z : draws) re2 += z.real() * z.real();
  re2 /= static_cast<double>(n);
  CHECK(re2 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("cnormal: negative variance rejected") {
  RngStream rng(1, 1);
  CHECK_THROWS_AS(sample_cnormal(rng, {0.0, 0.0}, -1.0, 1), std::invalid_argument);
}

TEST_CASE("rng: identical (seed, stream) replays identically") {
  RngStream a(1, 7), b(1, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(1, 7), d(1, 7);
  const auto s1 = sample_cnormal(c, {0, 0}, 1.0, 100);
  const auto s2 = sample_cnormal(d, {0, 0}, 1.0, 100);
  CHECK(s1 == s2);
}

TEST_CASE("rng: distinct streams decorrelated") {
  RngStream a(42, 1), b(42, 2);
  const std::size_t n = 100000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sa += x;
    sb += y;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  const double nd = static_cast<double>(n);
  const double cov = sab / nd - (sa / nd) * (sb / nd);
  const double rho = cov / std::sqrt((saa / nd - sa * sa / nd / nd) * (sbb / nd - sb * sb / nd / nd));
  CHECK(std::abs(rho) < 0.01);
}

TEST_CASE("hermitian_eig: identity") {
  const auto eig = hermitian_eig(CMat::identity(4));
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("hermitian_eig: rank-1 projector") {
  const std::size_t n = 5;
  RngStream rng(3, 1);
  CVec a(n);
  double norm = 0.0;
  for (auto& x : a) {
    x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    norm += std::norm(x);
  }
  norm = std::sqrt(norm);
  for (auto& x : a) x /= norm;
  CMat m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = a[i] * std::conj(a[j]);

  const auto eig = hermitian_eig(m);
  CHECK(eig.values[0] == doctest::Approx(1.0).epsilon(1e-10));
  for (std::size_t k = 1; k < n; ++k) CHECK(std::abs(eig.values[k]) < 1e-10);
  // first eigenvector colinear with a
  cplx dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += std::conj(eig.vectors(i, 0)) * a[i];
  CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("hermitian_eig: reconstruction property over random matrices") {
  RngStream rng(11, 2);
  for (std::size_t n : {2, 3, 5, 8, 16}) {
    const CMat m = random_hermitian(n, rng);
    const auto eig = hermitian_eig(m);
    CHECK(reconstruction_error(m, eig) <= 1e-8 * m.frobenius_norm());
    for (std::size_t k = 1; k < n; ++k) CHECK(eig.values[k - 1] >= eig.values[k]);
    for (std::size_t k = 0; k < n; ++k) {
      double len = 0.0;
      for (std::size_t i = 0; i < n; ++i) len += std::norm(eig.vectors(i, k));
      CHECK(len == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("hermitian_eig: rejects non-Hermitian input") {
  CMat m(2, 2);
  m(0, 0) = 1.0;
  m(0, 1) = {1.0, 0.0};
  m(1, 0) = {2.0, 0.0};  // != conj(m(0,1))
  m(1, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_eig(m), std::invalid_argument);
}

TEST_CASE("chi2_quantile: closed-form dof=2 case") {
  // chi^2_2 is Exp(1/2): CDF 1 - exp(-x/2), quantile of 1 - 1/e is 2
  CHECK(chi2_quantile(2, 1.0 - std::exp(-1.0)) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("chi2_quantile: dof=32 high quantile") {
  CHECK(chi2_quantile(32, 0.99) == doctest::Approx(53.4858).epsilon(1e-5));
}

TEST_CASE("chi2_quantile: quadrature oracle at dof=480") {
  const double tau = chi2_quantile(480, 0.99);
  // independent check: Simpson integration of the density up to tau
  const std::size_t steps = 200000;
  const double h = tau / steps;
  double integral = chi2_pdf(480, 0.0);
  for (std::size_t i = 1; i < steps; ++i)
    integral += (i % 2 ? 4.0 : 2.0) * chi2_pdf(480, i * h);
  integral += chi2_pdf(480, tau);
  integral *= h / 3.0;
  CHECK(integral == doctest::Approx(0.99).epsilon(1e-6));
}

TEST_CASE("chi2_quantile: invalid p rejected") {
  CHECK_THROWS_AS(chi2_quantile(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(chi2_quantile(4, 1.0), std::invalid_argument);
}

TEST_CASE("chi2_quantile: strictly increasing in p and dof") {
  double prev = 0.0;
  for (double p : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double q = chi2_quantile(10, p);
    CHECK(q > prev);
    prev = q;
  }
  prev = 0.0;
  for (std::size_t dof : {1, 2, 4, 8, 32, 128, 480}) {
    const double q = chi2_quantile(dof, 0.9);
    CHECK(q > prev);
    prev = q;
  }
}

TEST_CASE("pseudo_inverse: invertible 2x2 equals the inverse") {
  CMat m(2, 2);
  m(0, 0) = {1.0, 1.0};
  m(0, 1) = {2.0, 0.0};
  m(1, 0) = {0.0, -1.0};
  m(1, 1) = {1.0, 0.5};
  const CMat p = pseudo_inverse(m);
  const CMat id = m * p;
  CHECK((id - CMat::identity(2)).frobenius_norm() < 1e-10);
}

TEST_CASE("pseudo_inverse: column vector") {
  CMat a(3, 1);
  a(0, 0) = {1.0, 0.0};
  a(1, 0) = {0.0, 2.0};
  a(2, 0) = {2.0, -1.0};
  double norm2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) norm2 += std::norm(a(i, 0));
  const CMat p = pseudo_inverse(a);  // should be a^H / ||a||^2
  REQUIRE(p.rows() == 1);
  REQUIRE(p.cols() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(p(0, i) - std::conj(a(i, 0)) / norm2) < 1e-12);
}

TEST_CASE("pseudo_inverse: tall full-rank matches normal equations") {
  RngStream rng(5, 5);
  CMat m(4, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) m(i, j) = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  const CMat p = pseudo_inverse(m);
  // (m^H m)^-1 m^H via the 2x2 closed-form inverse
  const CMat g = m.adjoint() * m;
  const cplx det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
  CMat ginv(2, 2);
  ginv(0, 0) = g(1, 1) / det;
  ginv(1, 1) = g(0, 0) / det;
  ginv(0, 1) = -g(0, 1) / det;
  ginv(1, 0) = -g(1, 0) / det;
  const CMat expected = ginv * m.adjoint();
  CHECK((p - expected).frobenius_norm() < 1e-8 * m.frobenius_norm());
}

TEST_CASE("pseudo_inverse: Moore-Penrose identities on random shapes") {
  RngStream rng(9, 1);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{3, 5}, {5, 3}, {4, 4}, {6, 2}}) {
    CMat m(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) m(i, j) = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const CMat p = pseudo_inverse(m);
    const double tol = 1e-8 * m.frobenius_norm();
    CHECK((m * p * m - m).frobenius_norm() < tol);
    CHECK((p * m * p - p).frobenius_norm() < tol);
    const CMat mp = m * p;
    CHECK((mp - mp.adjoint()).frobenius_norm() < tol);
    const CMat pm = p * m;
    CHECK((pm - pm.adjoint()).frobenius_norm() < tol);
  }
}

TEST_CASE("pairwise_sum: matches plain accumulation") {
  std::vector<double> v;
  RngStream rng(2, 2);
  for (int i = 0; i < 1000; ++i) v.push_back(rng.uniform(-1, 1));
  double plain = 0.0;
  for (double x : v) plain += x;
  CHECK(pairwise_sum(v) == doctest::Approx(plain).epsilon(1e-12));
}
