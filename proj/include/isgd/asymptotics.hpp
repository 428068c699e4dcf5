#pragma once

#include <vector>

#include "isgd/model_family.hpp"

namespace isgd {

/// Fisher information with its spectrum (descending).
struct FisherInfo {
    enum class Source { Analytic, Empirical };

    Matrix matrix;
    Vector eigenvalues; // sorted descending
    Source source = Source::Analytic;
    long n_samples = 0; // Empirical only

    static FisherInfo analytic(const Matrix& f);
};

enum class RateTag { OneOverN, OneOverSqrtN };

/**
 * Asymptotic variance matrix with its validity flag. For the 1/n-rate
 * SGD formulas, valid means 2 gamma1 C F - I is positive-definite;
 * min_condition_eig records the smallest eigenvalue of that matrix.
 * When invalid, sigma is absent (empty) and only the flag is returned:
 * outside the region the rate degrades and no closed form applies.
 */
struct AsympVariance {
    Matrix sigma;
    bool valid = false;
    RateTag rate = RateTag::OneOverN;
    double min_condition_eig = 0.0;
};

/**
 * Variance of explicit/implicit SGD with gamma_n = gamma1/n and
 * condition matrix C commuting with F:
 *
 *     n Var(theta_n) -> gamma1^2 (2 gamma1 C F - I)^{-1} C F C.
 *
 * With C = I this is gamma1^2 (2 gamma1 F - I)^{-1} F; with C = F^{-1},
 * gamma1 = 1 it collapses to F^{-1}, the Cramer-Rao bound. Note the
 * gamma_n-normalized limit (1/gamma_n) Var(theta_n) equals sigma/gamma1.
 */
AsympVariance sgd_asymptotic_variance(const FisherInfo& fisher, const Matrix& c, double gamma1);

/// Averaged iterates are efficient: n Var(theta_bar_n) -> F^{-1}.
AsympVariance averaged_variance(const FisherInfo& fisher);

/// AdaGrad: sqrt(n) Var -> (gamma1/2) diag(F)^{-1/2}, valid for any gamma1.
AsympVariance adagrad_variance(const FisherInfo& fisher, double gamma1);

/// M-estimation: n Var -> psi^2 (2 v'(0) C S - I)^{-1} C S C, where
/// S = E[x x'], psi^2 = E[rho'(eps)^2] and v(z) = E[rho'(eps + z)].
AsympVariance mest_variance(const Matrix& s, const Matrix& c, double psi2, double vprime0);

/**
 * Learning-rate parameter minimizing the summed eigenvalue variances
 * sum_i x^2 lambda_i / (2 x lambda_i - 1) over x > 1/(2 min lambda).
 * Golden-section search on the strictly convex objective.
 */
double optimal_gamma1(const std::vector<double>& eigenvalues);

/// Largest transient amplification max_n |prod_{i<=n} (1 - b/i)| of the
/// explicit recursion's bias, computed by exact iteration (b = gamma1 *
/// lambda). Equals 1-b for b in (0,1) and binom(b, b/2)/2 at even
/// integer b.
double stability_max_gain(double gamma1_lambda);

/// max_{n <= n_max} prod_{i<=n} (1 + b/i)^{-1}; every factor is below 1,
/// so the implicit recursion never amplifies its initial bias.
double implicit_gain_bounded(double gamma1_lambda, long n_max);

/// (1/N) sum h'(x_i'theta) x_i x_i' with eigenvalues from the Jacobi
/// solver. Requires an analytic transfer derivative (GLM kinds).
FisherInfo empirical_fisher(const Dataset& data, const NaturalParamModel& model,
                            const Vector& theta);

} // namespace isgd
