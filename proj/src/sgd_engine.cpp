#include "isgd/sgd_engine.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "isgd/rng.hpp"

namespace isgd {

Method method_from_token(const std::string& token) {
    if (token == "explicit") return Method::Explicit;
    if (token == "implicit") return Method::Implicit;
    if (token == "explicit_avg") return Method::ExplicitAvg;
    if (token == "implicit_avg") return Method::ImplicitAvg;
    if (token == "adagrad") return Method::AdaGrad;
    if (token == "amari") return Method::Amari;
    throw std::invalid_argument("unknown method: " + token);
}

std::string method_token(Method method) {
    switch (method) {
    case Method::Explicit: return "explicit";
    case Method::Implicit: return "implicit";
    case Method::ExplicitAvg: return "explicit_avg";
    case Method::ImplicitAvg: return "implicit_avg";
    case Method::AdaGrad: return "adagrad";
    case Method::Amari: return "amari";
    }
    return "?";
}

namespace {

[[noreturn]] void throw_fixed_point(const char* what, const FixedPointBracket& bracket,
                                    double residual) {
    std::ostringstream msg;
    msg << "fixed-point solver: " << what << " (bracket [" << bracket.lo << ", " << bracket.hi
        << "], residual " << residual << ")";
    throw FixedPointError(msg.str(), bracket, residual);
}

void record_lambda(SgdState& state, double lambda) {
    if (state.track_lambda) state.lambda_history.push_back(lambda);
}

void update_average(SgdState& state) {
    state.avg_theta += (state.theta - state.avg_theta) / static_cast<double>(state.n);
}

} // namespace

FixedPointBracket implicit_bracket(const NaturalParamModel& model, const Observation& obs,
                                   const Vector& theta, double gamma_n) {
    if (!(gamma_n > 0)) throw std::invalid_argument("implicit_bracket: gamma_n must be positive");
    const double r = gamma_n * model.ell_prime(obs.x.dot(theta), obs.y);
    if (!std::isfinite(r)) throw FixedPointError("implicit_bracket: non-finite gradient");
    if (r > 0) return {0.0, r};
    return {r, 0.0};
}

namespace detail {

FixedPointSolution bisect_fixed_point(const std::function<double(double)>& ell_prime_eta,
                                      double eta0, double gamma_n, double quad_form) {
    const double r = gamma_n * ell_prime_eta(eta0);
    if (!std::isfinite(r)) throw FixedPointError("non-finite gradient at current iterate");
    if (r == 0.0) return {0.0, 1.0};
    // quad_form == 0 means ell' cannot change along the step direction.
    if (quad_form == 0.0) return {r, 1.0};

    const double tol = 1e-10 * std::max(1.0, std::abs(r));
    FixedPointBracket bracket{std::min(0.0, r), std::max(0.0, r)};
    const auto g = [&](double xi) { return gamma_n * ell_prime_eta(eta0 + xi * quad_form) - xi; };

    // g is strictly decreasing with g(0) = r, so the far endpoint has the
    // opposite sign (or is an exact root when ell' is locally constant).
    const double far = (r > 0) ? bracket.hi : bracket.lo;
    const double g_far = g(far);
    if (!std::isfinite(g_far)) throw_fixed_point("non-finite ell' at bracket endpoint", bracket, g_far);
    if (g_far == 0.0) return {far, 1.0};

    double lo = bracket.lo;
    double hi = bracket.hi;
    double xi = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double gv = g(xi);
        if (!std::isfinite(gv)) throw_fixed_point("non-finite ell' inside bracket", bracket, gv);
        if (std::abs(gv) <= tol) {
            const double lambda = xi / r;
            if (!(lambda > 0.0) || lambda > 1.0 + 1e-9)
                throw std::logic_error("fixed-point solver: lambda outside (0, 1]");
            return {xi, std::min(lambda, 1.0)};
        }
        // g(lo) > 0 > g(hi) for either bracket orientation.
        if (gv > 0)
            lo = xi;
        else
            hi = xi;
        xi = 0.5 * (lo + hi);
    }
    throw_fixed_point("no convergence after max iterations", bracket, g(xi));
}

} // namespace detail

FixedPointSolution solve_fixed_point(const NaturalParamModel& model, const Observation& obs,
                                     const Vector& theta, double gamma_n, double quad_form) {
    if (!(gamma_n > 0)) throw std::invalid_argument("solve_fixed_point: gamma_n must be positive");
    if (quad_form < 0) throw std::invalid_argument("solve_fixed_point: quad_form must be >= 0");
    const double eta0 = obs.x.dot(theta);

    if (model.kind == ModelKind::NormalIdentity) {
        const double r = gamma_n * (obs.y - eta0);
        if (!std::isfinite(r)) throw FixedPointError("non-finite gradient at current iterate");
        if (r == 0.0) return {0.0, 1.0};
        const double shrink = 1.0 / (1.0 + gamma_n * quad_form);
        return {r * shrink, shrink};
    }
    const double y = obs.y;
    return detail::bisect_fixed_point([&model, y](double eta) { return model.ell_prime(eta, y); },
                                      eta0, gamma_n, quad_form);
}

StepOutcome explicit_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate) {
    const double gamma_n = rate.at(state.n + 1, obs.x.squaredNorm());
    const double slope = model.ell_prime(obs.x.dot(state.theta), obs.y);
    if (!std::isfinite(slope)) return {false, 1.0};
    if (state.conditioner.kind == Conditioner::Kind::Identity)
        state.theta += gamma_n * slope * obs.x;
    else
        state.theta += gamma_n * slope * state.conditioner.apply(obs.x);
    ++state.n;
    return {true, 1.0};
}

StepOutcome implicit_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate) {
    if (!state.conditioner.is_static())
        throw std::invalid_argument("implicit_step: conditioner must be identity or fixed");
    const double gamma_n = rate.at(state.n + 1, obs.x.squaredNorm());
    const double quad = state.conditioner.quad_form(obs.x);
    const FixedPointSolution sol = solve_fixed_point(model, obs, state.theta, gamma_n, quad);
    if (state.conditioner.kind == Conditioner::Kind::Identity)
        state.theta += sol.xi * obs.x;
    else
        state.theta += sol.xi * state.conditioner.apply(obs.x);
    ++state.n;
    record_lambda(state, sol.lambda);
    return {true, sol.lambda};
}

StepOutcome averaged_step(SgdState& state, const NaturalParamModel& model,
                          const Observation& obs, const LearningRate& rate,
                          bool implicit_inner) {
    const StepOutcome outcome = implicit_inner ? implicit_step(state, model, obs, rate)
                                               : explicit_step(state, model, obs, rate);
    if (outcome.ok) update_average(state);
    return outcome;
}

StepOutcome adagrad_step(SgdState& state, const NaturalParamModel& model,
                         const Observation& obs, const LearningRate& rate) {
    if (state.conditioner.kind != Conditioner::Kind::AdaGradDiag)
        throw std::invalid_argument("adagrad_step: conditioner must be adagrad");
    const double slope = model.ell_prime(obs.x.dot(state.theta), obs.y);
    if (!std::isfinite(slope)) return {false, 1.0};
    const double gamma1 = rate.at(state.n + 1, obs.x.squaredNorm());
    Vector& accum = state.conditioner.adagrad_accum;
    const double eps = state.conditioner.epsilon;
    for (Eigen::Index i = 0; i < accum.size(); ++i) {
        const double gi = slope * obs.x(i);
        if (gi == 0.0) continue; // zero gradient: coordinate and accumulator unchanged
        accum(i) += gi * gi;
        state.theta(i) += gamma1 * gi / (std::sqrt(accum(i)) + eps);
    }
    ++state.n;
    return {true, 1.0};
}

StepOutcome amari_step(SgdState& state, const NaturalParamModel& model,
                       const Observation& obs, const LearningRate& rate) {
    if (state.conditioner.kind != Conditioner::Kind::AmariFisher)
        throw std::invalid_argument("amari_step: conditioner must be amari");
    const double slope = model.ell_prime(obs.x.dot(state.theta), obs.y);
    if (!std::isfinite(slope)) return {false, 1.0};
    const long n = state.n + 1;
    const double a_n = state.conditioner.a1 / static_cast<double>(n);
    const Vector grad = slope * obs.x;

    Matrix& cinv = state.conditioner.amari_cinv;
    cinv = (1.0 - a_n) * cinv + a_n * (grad * grad.transpose());

    Vector direction = cinv.ldlt().solve(grad);
    const double residual = (cinv * direction - grad).norm();
    if (!direction.allFinite() || residual > 1e-8 * std::max(1.0, grad.norm())) {
        const Matrix ridged =
            cinv + state.conditioner.ridge * Matrix::Identity(cinv.rows(), cinv.cols());
        direction = ridged.ldlt().solve(grad);
    }
    state.theta += rate.at(n, obs.x.squaredNorm()) * direction;
    ++state.n;
    return {true, 1.0};
}

void SgdConfig::validate() const {
    const bool averaged = method == Method::ExplicitAvg || method == Method::ImplicitAvg;
    if (method == Method::AdaGrad) {
        if (rate.mode != LearningRate::Mode::Constant)
            throw std::invalid_argument("config: adagrad requires a constant learning rate");
        if (!(rate.gamma1 > 0)) throw std::invalid_argument("config: gamma1 must be positive");
    } else {
        rate.validate(averaged);
    }
    const bool implicit_family = method == Method::Implicit || method == Method::ImplicitAvg;
    if (implicit_family && !conditioner.is_static())
        throw std::invalid_argument(
            "config: implicit updates support only identity or fixed conditioners");
    const bool explicit_family = method == Method::Explicit || method == Method::ExplicitAvg;
    if (explicit_family && !conditioner.is_static())
        throw std::invalid_argument(
            "config: explicit updates support only identity or fixed conditioners; "
            "use method adagrad/amari for adaptive conditioning");
    if (method == Method::AdaGrad && conditioner.kind != Conditioner::Kind::AdaGradDiag &&
        conditioner.kind != Conditioner::Kind::Identity)
        throw std::invalid_argument("config: adagrad method incompatible with this conditioner");
    if (method == Method::Amari && conditioner.kind != Conditioner::Kind::AmariFisher &&
        conditioner.kind != Conditioner::Kind::Identity)
        throw std::invalid_argument("config: amari method incompatible with this conditioner");
    if (order == DataOrder::SampleWithReplacement && !seed_set)
        throw std::invalid_argument("config: seed is mandatory when sampling with replacement");
    if (niters < 0 && npasses < 0)
        throw std::invalid_argument("config: need niters >= 0 or npasses >= 0");
    if (!(blowup_threshold > 0))
        throw std::invalid_argument("config: blowup_threshold must be positive");
}

FitResult fit(const Dataset& data, const NaturalParamModel& model, const SgdConfig& config) {
    config.validate();
    const Eigen::Index p = dataset_dim(data);
    const auto n_data = static_cast<long>(data.size());

    Conditioner cond = config.conditioner;
    if (config.method == Method::AdaGrad && cond.kind == Conditioner::Kind::Identity)
        cond = Conditioner::adagrad(p, cond.epsilon);
    if (config.method == Method::Amari && cond.kind == Conditioner::Kind::Identity)
        cond = Conditioner::amari(p, cond.a1, cond.ridge);

    Vector theta0 = config.theta0.size() == 0 ? Vector::Zero(p) : config.theta0;
    if (theta0.size() != p) throw std::invalid_argument("fit: theta0 dimension mismatch");

    SgdState state(std::move(theta0), std::move(cond));
    state.track_lambda = config.track_lambda;

    const long total_steps = config.niters >= 0 ? config.niters : config.npasses * n_data;
    const bool implicit_inner = config.method != Method::ExplicitAvg;

    FitResult result;
    Rng rng(config.seed);
    for (long step = 1; step <= total_steps; ++step) {
        const Observation& obs = (config.order == DataOrder::SampleWithReplacement)
                                     ? data[rng.uniform_index(static_cast<std::uint64_t>(n_data))]
                                     : data[static_cast<std::size_t>((step - 1) % n_data)];
        StepOutcome outcome;
        try {
            switch (config.method) {
            case Method::Explicit: outcome = explicit_step(state, model, obs, config.rate); break;
            case Method::Implicit: outcome = implicit_step(state, model, obs, config.rate); break;
            case Method::ExplicitAvg:
            case Method::ImplicitAvg:
                outcome = averaged_step(state, model, obs, config.rate, implicit_inner);
                break;
            case Method::AdaGrad: outcome = adagrad_step(state, model, obs, config.rate); break;
            case Method::Amari: outcome = amari_step(state, model, obs, config.rate); break;
            }
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
    const bool averaged = config.method == Method::ExplicitAvg || config.method == Method::ImplicitAvg;
    result.avg_theta = averaged ? state.avg_theta : state.theta;
    result.lambda_history = std::move(state.lambda_history);
    return result;
}

} // namespace isgd
