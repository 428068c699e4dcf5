#include "isgd/cox_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "isgd/rng.hpp"

namespace isgd {

namespace {

constexpr double kEtaOverflow = 700.0;

double guarded_exp(double eta) {
    if (eta > kEtaOverflow) return std::numeric_limits<double>::quiet_NaN();
    return std::exp(eta);
}

} // namespace

SurvivalDataset SurvivalDataset::from_unsorted(std::vector<SurvivalObservation> rows) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SurvivalObservation& a, const SurvivalObservation& b) {
                         return a.time < b.time;
                     });
    SurvivalDataset data;
    data.obs = std::move(rows);
    return data;
}

Eigen::Index SurvivalDataset::dim() const {
    if (obs.empty()) throw std::invalid_argument("survival dataset: empty");
    const Eigen::Index p = obs.front().x.size();
    for (const auto& row : obs)
        if (row.x.size() != p)
            throw std::invalid_argument("survival dataset: inconsistent covariate dimension");
    return p;
}

HazardTerms compute_hazard_terms(const SurvivalDataset& data, const Vector& theta) {
    const auto n = static_cast<Eigen::Index>(data.size());
    HazardTerms terms;
    terms.eta.resize(n);
    terms.cum_eta.resize(n);
    terms.H.resize(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = guarded_exp(data.obs[static_cast<std::size_t>(i)].x.dot(theta));
        terms.eta(i) = e;
        if (!std::isfinite(e)) terms.finite = false;
    }
    double suffix = 0.0;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        suffix += terms.eta(j);
        terms.cum_eta(j) = suffix;
    }
    double prefix = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (data.obs[static_cast<std::size_t>(i)].status != 0) prefix += 1.0 / terms.cum_eta(i);
        terms.H(i) = prefix;
    }
    return terms;
}

Vector cox_full_score(const SurvivalDataset& data, const Vector& theta) {
    const HazardTerms terms = compute_hazard_terms(data, theta);
    Vector score = Vector::Zero(data.dim());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        score += (data.obs[i].status - terms.H(idx) * terms.eta(idx)) * data.obs[i].x;
    }
    return score;
}

StepOutcome cox_explicit_step(SgdState& state, const SurvivalDataset& data,
                              const LearningRate& rate, std::size_t i) {
    if (i >= data.size()) throw std::invalid_argument("cox_explicit_step: index out of range");
    const SurvivalObservation& row = data.obs[i];
    const HazardTerms terms = compute_hazard_terms(data, state.theta);
    const double w = row.status - terms.H(static_cast<Eigen::Index>(i)) *
                                      terms.eta(static_cast<Eigen::Index>(i));
    if (!std::isfinite(w)) return {false, 1.0};
    const double gamma_n = rate.at(state.n + 1, row.x.squaredNorm());
    state.theta += gamma_n * w * state.conditioner.apply(row.x);
    ++state.n;
    return {true, 1.0};
}

StepOutcome cox_implicit_step(SgdState& state, const SurvivalDataset& data,
                              const LearningRate& rate, std::size_t i) {
    if (i >= data.size()) throw std::invalid_argument("cox_implicit_step: index out of range");
    const SurvivalObservation& row = data.obs[i];
    const HazardTerms terms = compute_hazard_terms(data, state.theta);
    const double h_i = terms.H(static_cast<Eigen::Index>(i));
    if (!std::isfinite(h_i)) return {false, 1.0};

    const double d_i = row.status;
    const double gamma_n = rate.at(state.n + 1, row.x.squaredNorm());
    const double quad = state.conditioner.quad_form(row.x);
    // With H_i frozen, ell'(eta) = d_i - H_i e^eta is decreasing in eta.
    const auto ell_prime = [d_i, h_i](double eta) { return d_i - h_i * guarded_exp(eta); };
    const FixedPointSolution sol =
        detail::bisect_fixed_point(ell_prime, row.x.dot(state.theta), gamma_n, quad);
    state.theta += sol.xi * state.conditioner.apply(row.x);
    ++state.n;
    if (state.track_lambda) state.lambda_history.push_back(sol.lambda);
    return {true, sol.lambda};
}

FitResult cox_fit(const SurvivalDataset& data, const SgdConfig& config) {
    config.validate();
    if (config.method != Method::Explicit && config.method != Method::Implicit)
        throw std::invalid_argument("cox_fit: method must be explicit or implicit");
    if (!config.conditioner.is_static())
        throw std::invalid_argument("cox_fit: conditioner must be identity or fixed");
    const Eigen::Index p = data.dim();
    const auto n_data = static_cast<std::uint64_t>(data.size());

    Vector theta0 = config.theta0.size() == 0 ? Vector::Zero(p) : config.theta0;
    if (theta0.size() != p) throw std::invalid_argument("cox_fit: theta0 dimension mismatch");
    SgdState state(std::move(theta0), config.conditioner);
    state.track_lambda = config.track_lambda;

    const long total_steps =
        config.niters >= 0 ? config.niters : config.npasses * static_cast<long>(n_data);

    FitResult result;
    Rng rng(config.seed);
    for (long step = 1; step <= total_steps; ++step) {
        const std::size_t i = rng.uniform_index(n_data);
        StepOutcome outcome;
        try {
            outcome = (config.method == Method::Implicit)
                          ? cox_implicit_step(state, data, config.rate, i)
                          : cox_explicit_step(state, data, config.rate, i);
        } catch (const FixedPointError&) {
            outcome.ok = false;
        }
        if (!outcome.ok || !state.theta.allFinite() ||
            state.theta.cwiseAbs().maxCoeff() > config.blowup_threshold) {
            result.diverged = true;
            result.divergence_snapshot = state.theta;
            break;
        }
        result.steps = step;
        if (config.traj_stride > 0 && step % config.traj_stride == 0) {
            result.traj_iters.push_back(step);
            result.trajectory.push_back(state.theta);
        }
    }
    result.theta = state.theta;
    result.avg_theta = state.theta;
    result.lambda_history = std::move(state.lambda_history);
    return result;
}

} // namespace isgd
