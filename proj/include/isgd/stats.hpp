#pragma once

#include <vector>

namespace isgd {

/// Regularized lower incomplete gamma P(a, x); series expansion for
/// x < a + 1, Lentz continued fraction otherwise. Accuracy ~1e-14.
double regularized_gamma_p(double a, double x);

/// Chi-squared CDF with `dof` degrees of freedom.
double chisq_cdf(double x, int dof);

/// Kolmogorov asymptotic survival function Q(t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
double kolmogorov_q(double t);

struct KsResult {
    double d = 0.0;      // sup-norm distance between empirical and reference CDF
    double pvalue = 1.0; // asymptotic, with the usual small-sample correction
};

/// One-sample KS test of `samples` against the chi-squared CDF.
KsResult ks_against_chisq(const std::vector<double>& samples, int dof);

/// Quantile with linear interpolation between order statistics
/// (R type 7). `q` in [0, 1]; input need not be sorted.
double quantile(std::vector<double> values, double q);

} // namespace isgd
