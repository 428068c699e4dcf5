#include "doctest.h"

#include <array>
#include <cmath>

#include "isgd/model_family.hpp"
#include "isgd/rng.hpp"

using namespace isgd;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Vector vec1(double a) {
    Vector v(1);
    v << a;
    return v;
}

} // namespace

TEST_SUITE("model_family") {

TEST_CASE("glm_score matches the transfer-function form") {
    const auto normal = NaturalParamModel::normal_identity();
    const Vector s1 = glm_score(normal, {vec2(1, 0), 2.0}, vec2(0, 0));
    CHECK(s1(0) == doctest::Approx(2.0));
    CHECK(s1(1) == doctest::Approx(0.0));

    const auto poisson = NaturalParamModel::poisson_log();
    const Vector s2 = glm_score(poisson, {vec2(1, 0), 2.0}, vec2(std::log(2.0), 0.0));
    CHECK(s2(0) == doctest::Approx(0.0));
    CHECK(s2(1) == doctest::Approx(0.0));

    const auto logit = NaturalParamModel::binomial_logit();
    const Vector s3 = glm_score(logit, {vec1(1), 1.0}, vec1(0.0));
    CHECK(s3(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("glm_score contract violations") {
    const auto normal = NaturalParamModel::normal_identity();
    CHECK_THROWS_AS(glm_score(normal, {vec2(1, 0), 1.0}, vec1(0)), std::invalid_argument);
    const auto huber = mloss_as_model(RobustLoss::huber(1.0));
    CHECK_THROWS_AS(glm_score(huber, {vec1(1), 1.0}, vec1(0)), std::invalid_argument);
}

TEST_CASE("poisson exp overflow is reported, not clamped") {
    const auto poisson = NaturalParamModel::poisson_log();
    const Vector s = glm_score(poisson, {vec1(1), 2.0}, vec1(800.0));
    CHECK_FALSE(std::isfinite(s(0)));
}

TEST_CASE("robust losses as natural-parameter adapters") {
    const auto squared = mloss_as_model(RobustLoss::squared());
    CHECK(squared.ell_prime(0.0, 3.0) == doctest::Approx(3.0));
    const auto huber1 = mloss_as_model(RobustLoss::huber(1.0));
    CHECK(huber1.ell_prime(0.0, 3.0) == doctest::Approx(1.0));   // clipped at delta
    CHECK(huber1.ell_prime(0.5, 1.0) == doctest::Approx(0.5));   // quadratic zone
    CHECK(huber1.lipschitz_L0.value() == doctest::Approx(1.0));
}

TEST_CASE("ell_prime monotone check on the documented grids") {
    const std::array<double, 3> grid = {-1.0, 0.0, 1.0};
    CHECK(ell_prime_monotone_check(NaturalParamModel::binomial_logit(), 1.0, grid));
    CHECK(ell_prime_monotone_check(NaturalParamModel::normal_identity(), 0.0, grid));

    NaturalParamModel bogus; // constructed counterexample: ell' = eta^2
    bogus.ell_prime = [](double eta, double) { return eta * eta; };
    CHECK_FALSE(ell_prime_monotone_check(bogus, 0.0, grid));

    const std::array<double, 2> bad_grid = {1.0, 1.0};
    CHECK_THROWS_AS(ell_prime_monotone_check(bogus, 0.0, bad_grid), std::invalid_argument);
}

TEST_CASE("property: score is collinear with x for every GLM kind") {
    Rng rng(101);
    const auto models = {NaturalParamModel::normal_identity(), NaturalParamModel::poisson_log(),
                         NaturalParamModel::binomial_logit()};
    for (const auto& model : models) {
        for (int trial = 0; trial < 200; ++trial) {
            Observation obs{Vector(3), rng.uniform(0.0, 3.0)};
            Vector theta(3);
            for (int j = 0; j < 3; ++j) {
                obs.x(j) = rng.normal();
                theta(j) = 0.3 * rng.normal();
            }
            const Vector score = glm_score(model, obs, theta);
            // cross products with x vanish exactly
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b)
                    CHECK(score(a) * obs.x(b) == doctest::Approx(score(b) * obs.x(a)).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: ell' nonincreasing on 1000 random draws per kind") {
    Rng rng(103);
    const auto models = {NaturalParamModel::normal_identity(), NaturalParamModel::poisson_log(),
                         NaturalParamModel::binomial_logit(),
                         mloss_as_model(RobustLoss::huber(1.345)),
                         mloss_as_model(RobustLoss::squared())};
    for (const auto& model : models) {
        for (int trial = 0; trial < 1000; ++trial) {
            const double y = model.kind == ModelKind::PoissonLog
                                 ? static_cast<double>(rng.poisson(2.0))
                                 : rng.normal();
            std::array<double, 5> grid;
            double eta = rng.uniform(-3.0, -1.0);
            for (auto& g : grid) {
                g = eta;
                eta += rng.uniform(0.1, 1.0);
            }
            CHECK(ell_prime_monotone_check(model, y, grid));
        }
    }
}

TEST_CASE("property: odd rho' gives the reflection symmetry") {
    Rng rng(107);
    const auto losses = {RobustLoss::huber(1.345), RobustLoss::squared()};
    for (const auto& loss : losses) {
        const auto model = mloss_as_model(loss);
        for (int trial = 0; trial < 500; ++trial) {
            const double y = rng.normal(0.0, 2.0);
            const double eta = rng.normal(0.0, 2.0);
            CHECK(model.ell_prime(eta, y) ==
                  doctest::Approx(-model.ell_prime(2.0 * y - eta, y)).epsilon(1e-12));
        }
    }
}

TEST_CASE("model tokens") {
    CHECK(NaturalParamModel::from_token("normal").kind == ModelKind::NormalIdentity);
    CHECK(NaturalParamModel::from_token("poisson").kind == ModelKind::PoissonLog);
    CHECK(NaturalParamModel::from_token("logistic").kind == ModelKind::BinomialLogit);
    CHECK(NaturalParamModel::from_token("squared").kind == ModelKind::MLoss);
    const auto huber = NaturalParamModel::from_token("huber:2.5");
    CHECK(huber.lipschitz_L0.value() == doctest::Approx(2.5));
    // default delta is the classical 1.345
    CHECK(NaturalParamModel::from_token("huber").lipschitz_L0.value() == doctest::Approx(1.345));
    CHECK_THROWS_AS(NaturalParamModel::from_token("probit"), std::invalid_argument);
    CHECK_THROWS_AS(RobustLoss::huber(-1.0), std::invalid_argument);
}

} // TEST_SUITE
