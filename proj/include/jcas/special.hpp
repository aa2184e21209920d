#pragma once

#include <cstddef>
#include <vector>

namespace jcas {

/// Regularized lower incomplete gamma function P(a, x).
double gamma_p(double a, double x);

/// CDF of the chi-squared distribution with `dof` degrees of freedom.
double chi2_cdf(std::size_t dof, double x);

/// Density of the chi-squared distribution.
double chi2_pdf(std::size_t dof, double x);

/// Quantile tau with chi2_cdf(dof, tau) = p, solved by Newton iteration on
/// the regularized incomplete gamma with bisection safeguards.
/// Relative accuracy ~1e-12.
double chi2_quantile(std::size_t dof, double p);

/// Inverse standard normal CDF (Acklam approximation, ~1e-9 absolute).
double inv_norm_cdf(double p);

/// Sums values in fixed pairwise order; reduction result is independent of
/// the caller's accumulation habits, which keeps batch losses reproducible.
double pairwise_sum(const std::vector<double>& v);

}  // namespace jcas
