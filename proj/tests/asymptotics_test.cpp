#include "doctest.h"

#include <cmath>

#include "isgd/asymptotics.hpp"
#include "isgd/rng.hpp"
#include "isgd/sgd_engine.hpp"
#include "isgd/simlab.hpp"

using namespace isgd;

namespace {

Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// random symmetric positive-definite matrix via a rotated diagonal
Matrix random_spd(Eigen::Index p, Rng& rng, double lo = 0.3, double hi = 4.0) {
    Matrix a(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) a(i, j) = rng.normal();
    const Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    Vector eigs(p);
    for (Eigen::Index i = 0; i < p; ++i) eigs(i) = rng.uniform(lo, hi);
    return q * eigs.asDiagonal() * q.transpose();
}

} // namespace

TEST_SUITE("asymptotics") {

TEST_CASE("sgd variance: scalar 1/n closed form") {
    Rng rng(401);
    for (int trial = 0; trial < 50; ++trial) {
        const double v2 = rng.uniform(0.5, 4.0);
        const double gamma1 = rng.uniform(1.0 / (2.0 * v2) + 0.05, 5.0);
        Matrix f(1, 1);
        f << v2;
        const AsympVariance sigma = sgd_asymptotic_variance(FisherInfo::analytic(f), Matrix::Identity(1, 1),
                                                      gamma1);
        CHECK(sigma.valid);
        CHECK(sigma.sigma(0, 0) ==
              doctest::Approx(gamma1 * gamma1 * v2 / (2.0 * gamma1 * v2 - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("sgd variance: C = F^-1 with gamma1 = 1 recovers the efficient bound") {
    Rng rng(403);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix f = random_spd(4, rng, 0.6, 3.0);
        const FisherInfo fisher = FisherInfo::analytic(f);
        const Matrix c = f.inverse();
        const AsympVariance sigma = sgd_asymptotic_variance(fisher, c, 1.0);
        CHECK(sigma.valid);
        CHECK((sigma.sigma - c).norm() <= 1e-10 * c.norm());
        // identical to the averaged estimator's limit
        const AsympVariance avg = averaged_variance(fisher);
        CHECK((sigma.sigma - avg.sigma).norm() <= 1e-10 * avg.sigma.norm());
    }
}

TEST_CASE("sgd variance: bivariate Poisson design values") {
    // F = 0.2 diag(e^{log 2}, e^{log 4}) = diag(0.4, 0.8), gamma_n = 10/(3n).
    const FisherInfo fisher = FisherInfo::analytic(poisson_bivariate_fisher());
    CHECK(fisher.matrix(0, 0) == doctest::Approx(0.4));
    CHECK(fisher.matrix(1, 1) == doctest::Approx(0.8));
    const double gamma1 = 10.0 / 3.0;
    const AsympVariance sigma = sgd_asymptotic_variance(fisher, Matrix::Identity(2, 2), gamma1);
    CHECK(sigma.valid);
    // the gamma_n-scaled limit is diag(0.8, 8/13), i.e. diag(0.80, 0.62) to 2 d.p.
    const Matrix scaled = sigma.sigma / gamma1;
    CHECK(scaled(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(scaled(1, 1) == doctest::Approx(8.0 / 13.0).epsilon(1e-12));
    CHECK(std::abs(scaled(0, 0) - 0.80) < 0.005);
    CHECK(std::abs(scaled(1, 1) - 0.62) < 0.005);
}

TEST_CASE("sgd variance: invalid region is flagged, not computed") {
    Matrix f(1, 1);
    f << 1.0;
    const AsympVariance sigma = sgd_asymptotic_variance(FisherInfo::analytic(f), Matrix::Identity(1, 1),
                                                  0.4); // 2*0.4*1 - 1 < 0
    CHECK_FALSE(sigma.valid);
    CHECK(sigma.sigma.size() == 0);
    CHECK(sigma.min_condition_eig < 0.0);
}

TEST_CASE("sgd variance: non-commuting conditioner is rejected") {
    Rng rng(407);
    const Matrix f = diag2(1.0, 3.0);
    Matrix c(2, 2);
    c << 2.0, 0.5, 0.5, 1.0; // does not commute with diag(1, 3)
    CHECK_THROWS_AS(sgd_asymptotic_variance(FisherInfo::analytic(f), c, 1.0), std::invalid_argument);
}

TEST_CASE("averaged variance") {
    CHECK((averaged_variance(FisherInfo::analytic(Matrix::Identity(3, 3))).sigma -
           Matrix::Identity(3, 3))
              .norm() < 1e-12);
    const AsympVariance diag = averaged_variance(FisherInfo::analytic(diag2(2.0, 4.0)));
    CHECK(diag.sigma(0, 0) == doctest::Approx(0.5));
    CHECK(diag.sigma(1, 1) == doctest::Approx(0.25));

    // 2x2 with off-diagonals against the adjugate formula
    Matrix f(2, 2);
    f << 2.0, 0.7, 0.7, 1.5;
    const AsympVariance dense = averaged_variance(FisherInfo::analytic(f));
    const double det = 2.0 * 1.5 - 0.7 * 0.7;
    CHECK(dense.sigma(0, 0) == doctest::Approx(1.5 / det).epsilon(1e-12));
    CHECK(dense.sigma(0, 1) == doctest::Approx(-0.7 / det).epsilon(1e-12));
    CHECK(dense.sigma(1, 1) == doctest::Approx(2.0 / det).epsilon(1e-12));

    CHECK_THROWS_AS(averaged_variance(FisherInfo::analytic(Matrix::Zero(2, 2))),
                    std::invalid_argument);
}

TEST_CASE("adagrad variance") {
    const AsympVariance unit = adagrad_variance(FisherInfo::analytic(Matrix::Identity(2, 2)), 2.0);
    CHECK((unit.sigma - Matrix::Identity(2, 2)).norm() < 1e-12);
    CHECK(unit.rate == RateTag::OneOverSqrtN);

    const AsympVariance diag = adagrad_variance(FisherInfo::analytic(diag2(4.0, 9.0)), 2.0);
    CHECK(diag.sigma(0, 0) == doctest::Approx(0.5));
    CHECK(diag.sigma(1, 1) == doctest::Approx(1.0 / 3.0));

    // off-diagonal entries of F are irrelevant
    Matrix f(2, 2);
    f << 4.0, 1.0, 1.0, 9.0;
    const AsympVariance dense = adagrad_variance(FisherInfo::analytic(f), 2.0);
    CHECK((dense.sigma - diag.sigma).norm() < 1e-12);

    CHECK_THROWS_AS(adagrad_variance(FisherInfo::analytic(diag2(1.0, 0.0)), 1.0),
                    std::invalid_argument);
}

TEST_CASE("m-estimation variance formula") {
    // squared loss under unit Gaussian noise reduces to the SGD formula
    Rng rng(409);
    const Matrix s = random_spd(3, rng, 0.8, 2.5);
    const AsympVariance via_mest = mest_variance(s, Matrix::Identity(3, 3), 1.0, 1.0);
    const AsympVariance via_sgd = sgd_asymptotic_variance(FisherInfo::analytic(s), Matrix::Identity(3, 3),
                                                    1.0);
    CHECK(via_mest.valid);
    CHECK((via_mest.sigma - via_sgd.sigma).norm() <= 1e-10 * via_sgd.sigma.norm());

    // scalar arithmetic: psi^2 = 2, v'(0) = 1, S = C = 1 gives 2/(2-1) = 2
    Matrix one(1, 1);
    one << 1.0;
    CHECK(mest_variance(one, one, 2.0, 1.0).sigma(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("huber variance against quadrature and Monte Carlo oracles") {
    // psi^2 and v'(0) for Huber(1.345) under standard normal noise,
    // precomputed by 1-D quadrature to 1e-15.
    const double psi2 = 0.71016454826904853;
    const double vprime0 = 0.82137476543132581;
    Matrix one(1, 1);
    one << 1.0;
    CHECK(mest_variance(one, one, psi2, vprime0).sigma(0, 0) ==
          doctest::Approx(1.104885362290218).epsilon(1e-12));

    // Monte Carlo: scalar Huber regression with x = 1, gamma_n = c/n.
    // n Var(theta_n) should approach psi^2 (2 v'(0) c - 1)^-1 c^2.
    const double c = 2.0;
    const double target = psi2 * c * c / (2.0 * vprime0 * c - 1.0);
    const auto model = mloss_as_model(RobustLoss::huber(1.345));
    const int reps = 600;
    const long n = 3000;
    Rng rng(411);
    std::vector<Vector> finals;
    for (int r = 0; r < reps; ++r) {
        Rng sub = Rng::substream(411, static_cast<std::uint64_t>(r));
        Dataset data;
        for (long i = 0; i < n; ++i) {
            Vector x(1);
            x << 1.0;
            data.push_back({x, 1.0 + sub.normal()});
        }
        SgdConfig config;
        config.method = Method::Implicit;
        config.rate = LearningRate::power_law(c);
        config.order = DataOrder::Stream;
        config.niters = n;
        finals.push_back(fit(data, model, config).theta);
    }
    const double mc = static_cast<double>(n) * empirical_variance(finals)(0, 0);
    CHECK(mc == doctest::Approx(target).epsilon(0.2));
}

TEST_CASE("optimal learning-rate parameter") {
    CHECK(optimal_gamma1({2.0}) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(optimal_gamma1({3.0, 3.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    // frozen 1e-5-step grid oracle for {0.5, 5}
    CHECK(optimal_gamma1({0.5, 5.0}) == doctest::Approx(1.7077916).epsilon(1e-4));
    CHECK_THROWS_AS(optimal_gamma1({}), std::invalid_argument);
    CHECK_THROWS_AS(optimal_gamma1({1.0, -2.0}), std::invalid_argument);

    // first-order optimality at the returned point
    Rng rng(419);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> eigs;
        for (int i = 0; i < 4; ++i) eigs.push_back(rng.uniform(0.3, 5.0));
        const double x_star = optimal_gamma1(eigs);
        const double lam_min = *std::min_element(eigs.begin(), eigs.end());
        CHECK(x_star > 1.0 / (2.0 * lam_min));
        const auto objective = [&eigs](double x) {
            double sum = 0.0;
            for (double lam : eigs) sum += x * x * lam / (2.0 * x * lam - 1.0);
            return sum;
        };
        CHECK(objective(x_star - 1e-3) >= objective(x_star) - 1e-12);
        CHECK(objective(x_star + 1e-3) >= objective(x_star) - 1e-12);
    }
}

TEST_CASE("stability gains") {
    CHECK(stability_max_gain(0.5) == doctest::Approx(0.5));
    CHECK(stability_max_gain(2.0) == doctest::Approx(1.0));
    CHECK(stability_max_gain(4.0) == doctest::Approx(3.0));
    // even-integer b: exactly binomial(b, b/2) / 2
    CHECK(stability_max_gain(6.0) == doctest::Approx(10.0));
    CHECK(stability_max_gain(8.0) == doctest::Approx(35.0));

    CHECK(implicit_gain_bounded(0.5, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(implicit_gain_bounded(10.0, 10000) < 1.0);
    Rng rng(421);
    for (int trial = 0; trial < 100; ++trial) {
        const double b = rng.uniform(0.01, 50.0);
        CHECK(implicit_gain_bounded(b, 1) == doctest::Approx(1.0 / (1.0 + b)));
        CHECK(implicit_gain_bounded(b, 1 + static_cast<long>(rng.uniform_index(1000))) <= 1.0);
    }
}

TEST_CASE("empirical Fisher information") {
    Rng rng(431);
    Dataset data;
    Matrix xxt = Matrix::Zero(2, 2);
    for (int i = 0; i < 500; ++i) {
        Observation obs{Vector(2), 0.0};
        obs.x << rng.normal(), rng.normal();
        obs.y = rng.bernoulli(0.5) ? 1.0 : 0.0;
        xxt += obs.x * obs.x.transpose();
        data.push_back(obs);
    }
    xxt /= 500.0;

    const FisherInfo normal = empirical_fisher(data, NaturalParamModel::normal_identity(),
                                               Vector::Zero(2));
    CHECK((normal.matrix - xxt).norm() < 1e-12 * xxt.norm());

    const FisherInfo logit = empirical_fisher(data, NaturalParamModel::binomial_logit(),
                                              Vector::Zero(2));
    CHECK((logit.matrix - 0.25 * xxt).norm() < 1e-12 * xxt.norm());

    // bivariate Poisson design at theta*: expectation is 0.2 diag(2, 4)
    Rng prng(433);
    const Dataset pdata = gen_poisson_bivariate(200000, prng);
    const FisherInfo pois = empirical_fisher(pdata, NaturalParamModel::poisson_log(),
                                             poisson_bivariate_theta_star());
    CHECK(pois.matrix(0, 0) == doctest::Approx(0.4).epsilon(0.05));
    CHECK(pois.matrix(1, 1) == doctest::Approx(0.8).epsilon(0.05));
    CHECK(std::abs(pois.matrix(0, 1)) < 1e-12); // design never mixes coordinates

    CHECK_THROWS_AS(empirical_fisher(data, mloss_as_model(RobustLoss::squared()), Vector::Zero(2)),
                    std::invalid_argument);
}

TEST_CASE("property: information-loss inequality holds in the valid region") {
    Rng rng(437);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng.uniform_index(4));
        const Matrix f = random_spd(p, rng, 0.4, 3.0);
        const FisherInfo fisher = FisherInfo::analytic(f);
        const double lam_min = fisher.eigenvalues.minCoeff();
        const double gamma1 = rng.uniform(1.0 / (2.0 * lam_min) + 0.05, 6.0);
        const AsympVariance sigma = sgd_asymptotic_variance(fisher, Matrix::Identity(p, p), gamma1);
        REQUIRE(sigma.valid);
        const Matrix loss = sigma.sigma - f.inverse();
        CHECK(jacobi_eigen(0.5 * (loss + loss.transpose())).values.minCoeff() >= -1e-8);
    }
}

} // TEST_SUITE
