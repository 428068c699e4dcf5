#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "isgd/linalg.hpp"

namespace isgd {

/// One data point: covariate vector and scalar outcome.
struct Observation {
    Vector x;
    double y = 0.0;
};

using Dataset = std::vector<Observation>;

/// Covariate dimension; throws if the dataset is empty or ragged.
Eigen::Index dataset_dim(const Dataset& data);

/// Robust loss rho for M-estimation. rho is convex with rho'(0) = 0;
/// Huber clips the derivative at delta.
struct RobustLoss {
    enum class Kind { Huber, Squared };

    Kind kind = Kind::Huber;
    double delta = 1.345; // classical 95%-efficiency choice

    double rho_prime(double r) const;
    double rho_dprime(double r) const;

    static RobustLoss huber(double delta);
    static RobustLoss squared();
};

enum class ModelKind { NormalIdentity, PoissonLog, BinomialLogit, MLoss };

/**
 * A model whose log-likelihood depends on theta only through the
 * natural parameter eta = x'theta: log f(y; x, theta) = ell(x'theta; y)
 * with ell concave in eta.
 *
 * ell_prime is the only member the fixed-point solver needs; ell_dprime
 * and the GLM transfer function h (with derivative) are optional and
 * present where an analytic form exists.
 *
 * Adapters are immutable after construction and safe to share across
 * concurrent replications.
 */
struct NaturalParamModel {
    ModelKind kind = ModelKind::NormalIdentity;
    std::function<double(double, double)> ell_prime;             // (eta, y)
    std::function<double(double, double)> ell_dprime;            // (eta, y), <= 0; may be empty
    std::function<double(double)> transfer_h;                    // GLM inverse link; may be empty
    std::function<double(double)> transfer_h_prime;              // may be empty
    std::optional<double> lipschitz_L0;

    bool is_glm() const { return kind != ModelKind::MLoss; }

    static NaturalParamModel normal_identity();
    static NaturalParamModel poisson_log();
    static NaturalParamModel binomial_logit();

    /// Parses "normal", "poisson", "logistic", "huber:<delta>", "squared".
    static NaturalParamModel from_token(const std::string& token);
};

/// Wraps a robust loss as a natural-parameter adapter with
/// ell'(eta; y) = rho'(y - eta), which is nonincreasing in eta.
NaturalParamModel mloss_as_model(const RobustLoss& loss);

/// GLM score [y - h(x'theta)] x. Non-finite eta under PoissonLog yields
/// a non-finite score; the caller decides.
Vector glm_score(const NaturalParamModel& model, const Observation& obs, const Vector& theta);

/// True iff ell'(eta; y) is nonincreasing along the strictly increasing grid.
bool ell_prime_monotone_check(const NaturalParamModel& model, double y,
                              std::span<const double> eta_grid);

} // namespace isgd
