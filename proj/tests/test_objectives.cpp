#include <doctest.h>

#include <cmath>

#include "jcas/objectives.hpp"
#include "jcas/rng.hpp"

using namespace jcas;

TEST_CASE("loss_comm_bce: perfect and uninformative LLRs") {
  // correct bits at the clamp limit: essentially zero loss
  const std::vector<double> llr{40.0, -40.0, 40.0, -40.0};
  const std::vector<std::uint8_t> bits{0, 1, 0, 1};
  CHECK(loss_comm_bce(llr, bits) < 1e-15);
  // all-zero LLRs cost exactly one bit per position
  CHECK(loss_comm_bce({0, 0, 0, 0}, bits) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("loss_comm_bce: equals the probability-space formula") {
  RngStream rng(70, 1);
  std::vector<double> llr(64);
  std::vector<std::uint8_t> bits(64);
  for (std::size_t i = 0; i < llr.size(); ++i) {
    llr[i] = rng.uniform(-6, 6);
    bits[i] = rng.bernoulli(0.5);
  }
  const double fast = loss_comm_bce(llr, bits);
  double ref = 0.0;
  for (std::size_t i = 0; i < llr.size(); ++i) {
    const double p1 = 1.0 / (1.0 + std::exp(llr[i]));  // ell = ln p0 - ln p1
    ref -= std::log2(bits[i] ? p1 : 1.0 - p1);
  }
  ref /= static_cast<double>(llr.size());
  CHECK(fast == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("loss_comm_bce_grad: matches finite differences") {
  RngStream rng(71, 1);
  std::vector<double> llr(16);
  std::vector<std::uint8_t> bits(16);
  for (std::size_t i = 0; i < llr.size(); ++i) {
    llr[i] = rng.uniform(-4, 4);
    bits[i] = rng.bernoulli(0.5);
  }
  const auto grad = loss_comm_bce_grad(llr, bits);
  const double h = 1e-6;
  for (std::size_t i = 0; i < llr.size(); ++i) {
    auto up = llr, dn = llr;
    up[i] += h;
    dn[i] -= h;
    const double fd = (loss_comm_bce(up, bits) - loss_comm_bce(dn, bits)) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("loss_detect_bce: reference points") {
  CHECK(loss_detect_bce({1.0, 0.0}, {1, 0}) < 1e-10);
  CHECK(loss_detect_bce({0.5, 0.5, 0.5}, {1, 0, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  // probability-space oracle on random batches
  RngStream rng(72, 1);
  std::vector<double> p(32);
  std::vector<std::uint8_t> t(32);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(0.01, 0.99);
    t[i] = rng.bernoulli(0.5);
  }
  double ref = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) ref -= std::log2(t[i] ? p[i] : 1.0 - p[i]);
  ref /= static_cast<double>(p.size());
  CHECK(loss_detect_bce(p, t) == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("loss_angle: zero when no targets present") {
  BatchLabels labels;
  labels.targets = {0, 0};
  labels.thetas = {0.3, -0.2};
  labels.n_wins = {3, 5};
  labels.sigma_ns2 = {1.0, 2.0};
  CHECK(loss_angle_crb_normalized({0.0, 0.0}, labels) == 0.0);
  CHECK(loss_angle_unmodified({0.0, 0.0}, labels) == 0.0);
}

TEST_CASE("loss_angle_crb_normalized: unit contribution at the variance floor") {
  BatchLabels labels;
  labels.targets = {1};
  labels.thetas = {0.0};
  labels.n_wins = {5};
  labels.sigma_ns2 = {0.3};
  // squared error sigma^2/N makes the weighted term exactly one
  const double err = std::sqrt(0.3 / 5.0);
  CHECK(loss_angle_crb_normalized({err}, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss_angle_crb_normalized: equal contributions at the bound") {
  // two operating points with errors at their own simplified bound level
  const double k3 = 16.0 * 16.0 * 16.0 - 16.0;
  auto bound_err = [&](double n_win, double sigma2) {
    const double c = (1.0 / (M_PI * M_PI)) * (sigma2 / n_win) * 6.0 / k3;
    return std::sqrt(c);
  };
  BatchLabels labels;
  labels.targets = {1, 1};
  labels.thetas = {0.0, 0.0};
  labels.n_wins = {1, 15};
  labels.sigma_ns2 = {1.0, 1.0};
  const std::vector<double> est{bound_err(1, 1.0), bound_err(15, 1.0)};
  // each term is (N/sigma^2) * C_bound = const; both scenarios contribute equally
  BatchLabels one;
  one.targets = {1};
  one.thetas = {0.0};
  one.n_wins = {1};
  one.sigma_ns2 = {1.0};
  const double c1 = loss_angle_crb_normalized({est[0]}, one);
  one.n_wins = {15};
  const double c2 = loss_angle_crb_normalized({est[1]}, one);
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-10));
}

TEST_CASE("loss_angle variants coincide at unit weighting") {
  BatchLabels labels;
  labels.targets = {1, 0, 1};
  labels.thetas = {0.2, 0.0, -0.3};
  labels.n_wins = {1, 1, 1};
  labels.sigma_ns2 = {1.0, 1.0, 1.0};
  const std::vector<double> est{0.15, 0.4, -0.25};
  CHECK(loss_angle_crb_normalized(est, labels) ==
        doctest::Approx(loss_angle_unmodified(est, labels)).epsilon(1e-15));
}

TEST_CASE("loss_angle: joint scale invariance of the modified loss") {
  RngStream rng(73, 1);
  BatchLabels labels;
  std::vector<double> est;
  for (int i = 0; i < 10; ++i) {
    labels.targets.push_back(1);
    labels.thetas.push_back(rng.uniform(-0.3, 0.3));
    labels.n_wins.push_back(1 + static_cast<int>(rng.uniform_int(15)));
    labels.sigma_ns2.push_back(std::pow(10.0, rng.uniform(-1, 1)));
    est.push_back(labels.thetas.back() + rng.uniform(-0.1, 0.1));
  }
  const double base = loss_angle_crb_normalized(est, labels);
  // sigma -> c sigma and squared error -> c * err^2 leaves the loss unchanged
  const double c = 3.7;
  BatchLabels scaled = labels;
  std::vector<double> est2(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    scaled.sigma_ns2[i] *= c;
    est2[i] = labels.thetas[i] + (est[i] - labels.thetas[i]) * std::sqrt(c);
  }
  CHECK(loss_angle_crb_normalized(est2, scaled) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("loss_total: weighting identities") {
  const LossParts parts{0.7, 0.4, 0.9};
  CHECK(loss_total(parts, {0.0, 1.0}) == doctest::Approx(0.7));
  CHECK(loss_total(parts, {1.0, 1.0}) == doctest::Approx(1.3));
  CHECK(loss_total(parts, {0.5, 1.0}) == doctest::Approx(0.5 * 0.7 + 0.5 * 0.4 + 0.5 * 0.9));
  CHECK_THROWS_AS(loss_total(parts, {1.5, 1.0}), std::invalid_argument);
}

TEST_CASE("loss_alpha_fair: reference values") {
  CHECK(loss_alpha_fair({2.0, 2.0}, 1.0) == doctest::Approx(-2.0).epsilon(1e-12));
  // alpha = 0 is sum-rate maximization
  CHECK(loss_alpha_fair({1.5, 2.5}, 0.0) == doctest::Approx(-4.0).epsilon(1e-12));
  CHECK_THROWS_AS(loss_alpha_fair({1.0}, -0.1), std::invalid_argument);
}

TEST_CASE("loss_alpha_fair: gradient direction continuous at alpha = 1") {
  const std::vector<double> rates{0.6, 1.8, 3.1};
  const auto g1 = loss_alpha_fair_grad(rates, 1.0);
  const auto g_near = loss_alpha_fair_grad(rates, 1.001);
  // compare normalized directions
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  const double n1 = norm(g1), n2 = norm(g_near);
  for (std::size_t i = 0; i < rates.size(); ++i)
    CHECK(g1[i] / n1 == doctest::Approx(g_near[i] / n2).epsilon(0.01));
  // and both match finite differences of their own loss
  const double h = 1e-7;
  for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
    const auto g = loss_alpha_fair_grad(rates, alpha);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      auto up = rates, dn = rates;
      up[i] += h;
      dn[i] -= h;
      const double fd = (loss_alpha_fair(up, alpha) - loss_alpha_fair(dn, alpha)) / (2 * h);
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("metric_bmi: endpoints and the BCE identity") {
  const std::vector<std::uint8_t> bits{0, 1, 1, 0, 1, 0, 0, 1};
  std::vector<double> perfect(8), zero(8, 0.0);
  for (std::size_t i = 0; i < 8; ++i) perfect[i] = bits[i] ? -40.0 : 40.0;
  CHECK(metric_bmi(perfect, bits, 16) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(metric_bmi(zero, bits, 16) == doctest::Approx(0.0).epsilon(1e-12));

  // BMI + log2(M) * meanBCE = log2(M) whenever the clamp is inactive
  RngStream rng(74, 1);
  std::vector<double> llr(32);
  std::vector<std::uint8_t> b(32);
  for (std::size_t i = 0; i < llr.size(); ++i) {
    b[i] = rng.bernoulli(0.5);
    llr[i] = (b[i] ? -1.0 : 1.0) * rng.uniform(0.5, 4.0);  // biased toward correct
  }
  const double bmi = metric_bmi(llr, b, 16);
  const double bce = loss_comm_bce(llr, b);
  CHECK(bmi + 4.0 * bce == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("metric_sensing: perfect detector and constant offset estimator") {
  const std::vector<std::uint8_t> t{1, 0, 1, 0, 1};
  const std::vector<std::uint8_t> dec{1, 0, 1, 0, 1};
  std::vector<double> theta{0.1, 0.0, -0.2, 0.0, 0.3};
  std::vector<double> est(5);
  for (std::size_t i = 0; i < 5; ++i) est[i] = theta[i] + 0.01;
  const SensingMetrics m = metric_sensing(dec, t, est, theta);
  CHECK(m.p_d == 1.0);
  CHECK(m.p_f == 0.0);
  REQUIRE(m.rmse_rad.has_value());
  CHECK(*m.rmse_rad == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(*m.bias_rad == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("metric_sensing: no targets leaves accuracy fields absent") {
  const SensingMetrics m = metric_sensing({0, 1}, {0, 0}, {0.0, 0.0}, {0.0, 0.0});
  CHECK_FALSE(m.rmse_rad.has_value());
  CHECK_FALSE(m.bias_rad.has_value());
  CHECK(m.p_f == doctest::Approx(0.5));
}

TEST_CASE("losses are nonnegative") {
  RngStream rng(75, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> llr(8);
    std::vector<std::uint8_t> bits(8);
    for (std::size_t i = 0; i < 8; ++i) {
      llr[i] = rng.uniform(-10, 10);
      bits[i] = rng.bernoulli(0.5);
    }
    CHECK(loss_comm_bce(llr, bits) >= 0.0);
  }
}
