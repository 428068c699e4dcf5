#include "isgd/model_family.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isgd {

namespace {

constexpr double kEtaOverflow = 700.0; // exp overflows shortly above this

// exp(eta) with an overflow guard: a non-finite value is reported
// instead of clamping, so divergence stays visible downstream.
double guarded_exp(double eta) {
    if (eta > kEtaOverflow) return std::numeric_limits<double>::quiet_NaN();
    return std::exp(eta);
}

double sigmoid(double eta) {
    if (eta >= 0) {
        const double z = std::exp(-eta);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(eta);
    return z / (1.0 + z);
}

} // namespace

Eigen::Index dataset_dim(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("dataset_dim: empty dataset");
    const Eigen::Index p = data.front().x.size();
    if (p < 1) throw std::invalid_argument("dataset_dim: covariates must have dimension >= 1");
    for (const auto& obs : data)
        if (obs.x.size() != p)
            throw std::invalid_argument("dataset_dim: inconsistent covariate dimension");
    return p;
}

double RobustLoss::rho_prime(double r) const {
    switch (kind) {
    case Kind::Squared: return r;
    case Kind::Huber: return std::clamp(r, -delta, delta);
    }
    return 0.0;
}

double RobustLoss::rho_dprime(double r) const {
    switch (kind) {
    case Kind::Squared: return 1.0;
    case Kind::Huber: return std::abs(r) <= delta ? 1.0 : 0.0;
    }
    return 0.0;
}

RobustLoss RobustLoss::huber(double delta) {
    if (!(delta > 0)) throw std::invalid_argument("RobustLoss: huber delta must be positive");
    RobustLoss loss;
    loss.kind = Kind::Huber;
    loss.delta = delta;
    return loss;
}

RobustLoss RobustLoss::squared() {
    RobustLoss loss;
    loss.kind = Kind::Squared;
    return loss;
}

NaturalParamModel NaturalParamModel::normal_identity() {
    NaturalParamModel m;
    m.kind = ModelKind::NormalIdentity;
    m.ell_prime = [](double eta, double y) { return y - eta; };
    m.ell_dprime = [](double, double) { return -1.0; };
    m.transfer_h = [](double eta) { return eta; };
    m.transfer_h_prime = [](double) { return 1.0; };
    return m;
}

NaturalParamModel NaturalParamModel::poisson_log() {
    NaturalParamModel m;
    m.kind = ModelKind::PoissonLog;
    m.ell_prime = [](double eta, double y) { return y - guarded_exp(eta); };
    m.ell_dprime = [](double eta, double) { return -guarded_exp(eta); };
    m.transfer_h = [](double eta) { return guarded_exp(eta); };
    m.transfer_h_prime = [](double eta) { return guarded_exp(eta); };
    return m;
}

NaturalParamModel NaturalParamModel::binomial_logit() {
    NaturalParamModel m;
    m.kind = ModelKind::BinomialLogit;
    m.ell_prime = [](double eta, double y) { return y - sigmoid(eta); };
    m.ell_dprime = [](double eta, double) {
        const double s = sigmoid(eta);
        return -s * (1.0 - s);
    };
    m.transfer_h = [](double eta) { return sigmoid(eta); };
    m.transfer_h_prime = [](double eta) {
        const double s = sigmoid(eta);
        return s * (1.0 - s);
    };
    m.lipschitz_L0 = 1.0; // |y - sigma(eta)| <= 1 for y in {0, 1}
    return m;
}

NaturalParamModel NaturalParamModel::from_token(const std::string& token) {
    if (token == "normal") return normal_identity();
    if (token == "poisson") return poisson_log();
    if (token == "logistic") return binomial_logit();
    if (token == "squared") return mloss_as_model(RobustLoss::squared());
    if (token.rfind("huber", 0) == 0) {
        double delta = 1.345;
        const auto colon = token.find(':');
        if (colon != std::string::npos) {
            try {
                delta = std::stod(token.substr(colon + 1));
            } catch (const std::exception&) {
                throw std::invalid_argument("unknown model token: " + token);
            }
        }
        return mloss_as_model(RobustLoss::huber(delta));
    }
    throw std::invalid_argument("unknown model token: " + token);
}

NaturalParamModel mloss_as_model(const RobustLoss& loss) {
    NaturalParamModel m;
    m.kind = ModelKind::MLoss;
    m.ell_prime = [loss](double eta, double y) { return loss.rho_prime(y - eta); };
    m.ell_dprime = [loss](double eta, double y) { return -loss.rho_dprime(y - eta); };
    if (loss.kind == RobustLoss::Kind::Huber) m.lipschitz_L0 = loss.delta;
    return m;
}

Vector glm_score(const NaturalParamModel& model, const Observation& obs, const Vector& theta) {
    if (!model.is_glm()) throw std::invalid_argument("glm_score: model is not a GLM kind");
    if (theta.size() != obs.x.size())
        throw std::invalid_argument("glm_score: dimension mismatch");
    const double eta = obs.x.dot(theta);
    return (obs.y - model.transfer_h(eta)) * obs.x;
}

bool ell_prime_monotone_check(const NaturalParamModel& model, double y,
                              std::span<const double> eta_grid) {
    for (std::size_t i = 1; i < eta_grid.size(); ++i)
        if (!(eta_grid[i] > eta_grid[i - 1]))
            throw std::invalid_argument("ell_prime_monotone_check: grid must be strictly increasing");
    for (std::size_t i = 1; i < eta_grid.size(); ++i) {
        const double prev = model.ell_prime(eta_grid[i - 1], y);
        const double cur = model.ell_prime(eta_grid[i], y);
        if (cur > prev) return false;
    }
    return true;
}

} // namespace isgd
