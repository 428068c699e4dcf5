#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isgd/conditioner.hpp"
#include "isgd/learning_rate.hpp"
#include "isgd/model_family.hpp"

namespace isgd {

enum class Method { Explicit, Implicit, ExplicitAvg, ImplicitAvg, AdaGrad, Amari };

Method method_from_token(const std::string& token);
std::string method_token(Method method);

/// Mutable state of one SGD run.
struct SgdState {
    Vector theta;
    Vector avg_theta;
    long n = 0;
    Conditioner conditioner;
    bool track_lambda = false;
    std::vector<double> lambda_history;

    explicit SgdState(Eigen::Index p, Conditioner cond = Conditioner::identity())
        : theta(Vector::Zero(p)), avg_theta(Vector::Zero(p)), conditioner(std::move(cond)) {}
    SgdState(Vector theta0, Conditioner cond)
        : theta(std::move(theta0)), avg_theta(theta), conditioner(std::move(cond)) {
        avg_theta.setZero();
    }
};

/// Search bounds for the fixed-point variable xi = gamma_n lambda_n ell'.
struct FixedPointBracket {
    double lo = 0.0;
    double hi = 0.0;
};

/// Bracket [0, r_n] or [r_n, 0] with r_n = gamma_n ell'(x'theta; y).
/// Throws on non-finite r_n.
FixedPointBracket implicit_bracket(const NaturalParamModel& model, const Observation& obs,
                                   const Vector& theta, double gamma_n);

struct FixedPointSolution {
    double xi = 0.0;
    double lambda = 1.0; // in (0, 1]; 1 at zero gradient by convention
};

/// Raised on a non-finite gradient or (unreachably, given the monotone
/// bracket) root-finder non-convergence; carries the search bounds and
/// the last residual.
struct FixedPointError : std::runtime_error {
    FixedPointBracket bracket;
    double residual = 0.0;
    explicit FixedPointError(const std::string& msg, FixedPointBracket b = {}, double res = 0.0)
        : std::runtime_error(msg), bracket(b), residual(res) {}
};

/**
 * Solves xi = gamma_n ell'(eta0 + xi * quad_form; y) on its bracket.
 *
 * g(xi) = gamma_n ell'(eta0 + xi q; y) - xi is strictly decreasing on the
 * bracket, so the sign change is unique; bisection converges to tolerance
 * 1e-10 * max(1, |r_n|). NormalIdentity short-circuits to the closed form
 * xi = gamma (y - eta0) / (1 + gamma q).
 */
FixedPointSolution solve_fixed_point(const NaturalParamModel& model, const Observation& obs,
                                     const Vector& theta, double gamma_n, double quad_form);

namespace detail {
/// Generic bisection path on a y-bound ell'(eta); exposed so tests can
/// cross-check it against the NormalIdentity closed form.
FixedPointSolution bisect_fixed_point(const std::function<double(double)>& ell_prime_eta,
                                      double eta0, double gamma_n, double quad_form);
} // namespace detail

/// Per-step result. ok=false means the step was refused on a non-finite
/// gradient; the state is left untouched for diagnosis.
struct StepOutcome {
    bool ok = true;
    double lambda = 1.0;
};

StepOutcome explicit_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate);
StepOutcome implicit_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate);
/// Runs the configured inner step, then updates the running mean of iterates.
StepOutcome averaged_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate,
                          bool implicit_inner = true);
StepOutcome adagrad_step(SgdState& state, const NaturalParamModel& model,
                         const Observation& obs, const LearningRate& rate);
StepOutcome amari_step(SgdState& state, const NaturalParamModel& model,
                       const Observation& obs, const LearningRate& rate);

enum class DataOrder { SampleWithReplacement, Stream };

struct SgdConfig {
    Method method = Method::Implicit;
    LearningRate rate;
    Conditioner conditioner;
    DataOrder order = DataOrder::SampleWithReplacement;
    std::uint64_t seed = 0;
    bool seed_set = false; // sampling without a seed is refused
    long niters = -1;      // takes precedence when >= 0
    long npasses = 1;
    bool track_lambda = false;
    double blowup_threshold = 1e8;
    long traj_stride = 0; // 0 = no trajectory
    Vector theta0;        // empty = zero vector

    /// Throws std::invalid_argument on inconsistent combinations
    /// (e.g. implicit with an adaptive conditioner).
    void validate() const;
};

struct FitResult {
    Vector theta;
    Vector avg_theta;
    long steps = 0;
    bool diverged = false;
    std::vector<double> lambda_history;
    std::vector<long> traj_iters;
    std::vector<Vector> trajectory;
    Vector divergence_snapshot; // iterate at the diverging step
};

/// Runs the configured method over the dataset: sampling with
/// replacement from a seeded PRNG, or streaming in order.
FitResult fit(const Dataset& data, const NaturalParamModel& model, const SgdConfig& config);

} // namespace isgd
