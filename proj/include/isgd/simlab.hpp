#pragma once

#include <map>
#include <vector>

#include "isgd/cox_model.hpp"
#include "isgd/model_family.hpp"
#include "isgd/rng.hpp"
#include "isgd/stats.hpp"

namespace isgd {

/// Normal linear design: x ~ N_p(0, S) with S diagonal, y | x ~ N(x'theta*, 1).
struct NormalLinearSpec {
    Vector eigenvalues; // diagonal of S
    Vector theta_star;
};

/// Fills a diagonal S spec with entries uniform in [lo, hi] (drawn once
/// per experiment so the theoretical variance is well-defined).
Vector draw_diagonal_eigenvalues(Eigen::Index p, double lo, double hi, Rng& rng);

Dataset gen_normal_linear(const NormalLinearSpec& spec, long n, Rng& rng);

/// Bivariate Poisson design: x is (0,0), (1,0) or (0,1) with probabilities
/// 0.6, 0.2, 0.2; theta* = (log 2, log 4); y ~ Poisson(exp(x'theta*)).
Dataset gen_poisson_bivariate(long n, Rng& rng);
Vector poisson_bivariate_theta_star();
/// Exact E[h'(x'theta*) x x'] = 0.2 diag(e^theta1, e^theta2) for that design.
Matrix poisson_bivariate_fisher();

/// Cox design: x ~ N(0, 0.2 U + I), theta*_k = 2 (-1)^k exp(-0.1 k),
/// survival times exponential with rate eta_i(theta*), censoring
/// probability (1 + exp(-a (y - b)))^-1 with b the configured quantile of
/// the realized times and a set so min y is censored with the given
/// probability.
struct CoxSpec {
    long n = 1000;
    int p = 20;
    double censor_quantile = 0.8;
    double min_censor_prob = 0.001;
    Vector theta_star; // empty = the alternating-decay default for dimension p
};

Vector cox_theta_star(int p);
SurvivalDataset gen_cox(const CoxSpec& spec, Rng& rng);

/// Contaminated linear design: x ~ N(0, (1/n) I), ||theta*|| = 6 sqrt(p);
/// y ~ N(x'theta*, 1) except with probability contamination_rate, y is the
/// fixed outlier value.
struct ContaminatedSpec {
    long n = 1000;
    int p = 200;
    double contamination_rate = 0.05;
    double outlier_value = 10.0;
    Vector theta_star; // empty = random direction scaled to 6 sqrt(p)
};

Vector contaminated_theta_star(int p, Rng& rng);
Dataset gen_contaminated(const ContaminatedSpec& spec, Rng& rng);

/// Per-diagnostic bundle the experiments emit (CSV blocks plus a JSON
/// summary): variance matrices, chi-squared samples with their KS
/// statistic, and MSE quantile curves. Fields a given experiment does
/// not produce stay empty.
struct DiagnosticReport {
    Matrix empirical_variance;
    Matrix theoretical_variance;
    std::vector<double> chisq_samples;
    double ks_statistic = 0.0;
    double ks_pvalue = 1.0;
    std::map<double, std::vector<double>> mse_quantiles;
};

/// Unbiased sample covariance of the final iterates (needs >= 2).
Matrix empirical_variance(const std::vector<Vector>& finals);

/// n (theta_hat - theta*)' Sigma^-1 (theta_hat - theta*); chi-squared
/// with p degrees of freedom under correct normality.
double chisq_statistic(const Vector& theta_hat, const Vector& theta_star, const Matrix& sigma,
                       long n_iters);

/// Per-iteration quantiles of ||theta_n - theta*||^2 across replications.
/// All trajectories must have equal length; returns quantile -> curve.
std::map<double, std::vector<double>> mse_quantile_curves(
    const std::vector<std::vector<Vector>>& replication_trajectories, const Vector& theta_star,
    const std::vector<double>& quantiles);

} // namespace isgd
