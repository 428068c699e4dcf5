#include "isgd/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isgd/linalg.hpp"

namespace isgd {

namespace {

void check_commutes(const Matrix& c, const Matrix& f) {
    const double tol = 1e-8 * std::max(1e-300, c.norm() * f.norm());
    if ((c * f - f * c).norm() > tol)
        throw std::invalid_argument("asymptotics: condition matrix must commute with F");
}

// Common body of the 1/n-rate variance formulas:
// scale^2 (2 scale A - I)^{-1} A ... with A = C F (symmetric here).
AsympVariance one_over_n_variance(const Matrix& cf, const Matrix& c, double scale,
                                  double front) {
    const Eigen::Index p = cf.rows();
    const Matrix condition = 2.0 * scale * cf - Matrix::Identity(p, p);
    AsympVariance out;
    out.rate = RateTag::OneOverN;
    out.min_condition_eig = jacobi_eigen(condition).values.minCoeff();
    if (out.min_condition_eig <= 0) {
        out.valid = false;
        return out;
    }
    out.valid = true;
    out.sigma = front * condition.inverse() * cf * c;
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
    return out;
}

} // namespace

FisherInfo FisherInfo::analytic(const Matrix& f) {
    if (!is_symmetric(f)) throw std::invalid_argument("FisherInfo: matrix must be symmetric");
    FisherInfo info;
    info.matrix = 0.5 * (f + f.transpose());
    const SymmetricEigen eig = jacobi_eigen(info.matrix);
    info.eigenvalues = eig.values;
    const Matrix reconstructed =
        eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    if ((reconstructed - info.matrix).norm() > 1e-8 * std::max(1.0, info.matrix.norm()))
        throw std::runtime_error("FisherInfo: eigendecomposition reconstruction failed");
    return info;
}

AsympVariance sgd_asymptotic_variance(const FisherInfo& fisher, const Matrix& c, double gamma1) {
    if (!(gamma1 > 0)) throw std::invalid_argument("sgd_asymptotic_variance: gamma1 must be positive");
    if (!is_symmetric(c)) throw std::invalid_argument("sgd_asymptotic_variance: C must be symmetric");
    if (jacobi_eigen(c).values.minCoeff() <= 0)
        throw std::invalid_argument("sgd_asymptotic_variance: C must be positive-definite");
    check_commutes(c, fisher.matrix);
    const Matrix cf = 0.5 * (c * fisher.matrix + fisher.matrix * c);
    return one_over_n_variance(cf, c, gamma1, gamma1 * gamma1);
}

AsympVariance averaged_variance(const FisherInfo& fisher) {
    const double min_abs_eig = fisher.eigenvalues.cwiseAbs().minCoeff();
    if (min_abs_eig <= 1e-12 * std::max(1.0, fisher.eigenvalues.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("averaged_variance: F is singular");
    AsympVariance out;
    out.valid = true;
    out.rate = RateTag::OneOverN;
    out.min_condition_eig = fisher.eigenvalues.minCoeff();
    out.sigma = fisher.matrix.inverse();
    out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
    return out;
}

AsympVariance adagrad_variance(const FisherInfo& fisher, double gamma1) {
    if (!(gamma1 > 0)) throw std::invalid_argument("adagrad_variance: gamma1 must be positive");
    const Eigen::Index p = fisher.matrix.rows();
    AsympVariance out;
    out.valid = true;
    out.rate = RateTag::OneOverSqrtN;
    out.sigma = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double d = fisher.matrix(i, i);
        if (!(d > 0))
            throw std::invalid_argument("adagrad_variance: diag(F) must be entrywise positive");
        out.sigma(i, i) = 0.5 * gamma1 / std::sqrt(d);
    }
    out.min_condition_eig = fisher.matrix.diagonal().minCoeff();
    return out;
}

AsympVariance mest_variance(const Matrix& s, const Matrix& c, double psi2, double vprime0) {
    if (!(psi2 >= 0)) throw std::invalid_argument("mest_variance: psi2 must be >= 0");
    if (!(vprime0 > 0)) throw std::invalid_argument("mest_variance: v'(0) must be positive");
    if (!is_symmetric(s) || jacobi_eigen(s).values.minCoeff() <= 0)
        throw std::invalid_argument("mest_variance: S must be symmetric positive-definite");
    if (!is_symmetric(c)) throw std::invalid_argument("mest_variance: C must be symmetric");
    check_commutes(c, s);
    const Matrix cs = 0.5 * (c * s + s * c);
    return one_over_n_variance(cs, c, vprime0, psi2);
}

double optimal_gamma1(const std::vector<double>& eigenvalues) {
    if (eigenvalues.empty()) throw std::invalid_argument("optimal_gamma1: no eigenvalues");
    for (double lam : eigenvalues)
        if (!(lam > 0)) throw std::invalid_argument("optimal_gamma1: eigenvalues must be positive");
    const double lam_min = *std::min_element(eigenvalues.begin(), eigenvalues.end());

    const auto objective = [&eigenvalues](double x) {
        double sum = 0.0;
        for (double lam : eigenvalues) sum += x * x * lam / (2.0 * x * lam - 1.0);
        return sum;
    };

    double lo = 1.0 / (2.0 * lam_min) + 1e-9;
    double hi = 10.0 / lam_min;
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = objective(a);
    double fb = objective(b);
    while (hi - lo > 1e-8 * std::max(1.0, hi)) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        }
    }
    return 0.5 * (lo + hi);
}

double stability_max_gain(double gamma1_lambda) {
    const double b = gamma1_lambda;
    if (!(b > 0)) throw std::invalid_argument("stability_max_gain: b must be positive");
    // |1 - b/i| >= 1 only while i <= b/2, and every factor is in (0, 1)
    // once i > b, so the running maximum settles by i = b + 1.
    double product = 1.0;
    double max_gain = 0.0;
    const long last = static_cast<long>(std::ceil(b)) + 1;
    for (long i = 1; i <= last; ++i) {
        product *= 1.0 - b / static_cast<double>(i);
        max_gain = std::max(max_gain, std::abs(product));
    }
    return max_gain;
}

double implicit_gain_bounded(double gamma1_lambda, long n_max) {
    const double b = gamma1_lambda;
    if (!(b > 0)) throw std::invalid_argument("implicit_gain_bounded: b must be positive");
    if (n_max < 1) throw std::invalid_argument("implicit_gain_bounded: n_max must be >= 1");
    double product = 1.0;
    double max_gain = 0.0;
    for (long i = 1; i <= n_max; ++i) {
        product /= 1.0 + b / static_cast<double>(i);
        max_gain = std::max(max_gain, product);
        if (product < 1e-300) break; // further factors only shrink it
    }
    return max_gain;
}

FisherInfo empirical_fisher(const Dataset& data, const NaturalParamModel& model,
                            const Vector& theta) {
    if (data.empty()) throw std::invalid_argument("empirical_fisher: empty dataset");
    if (!model.is_glm() || !model.transfer_h_prime)
        throw std::invalid_argument("empirical_fisher: model needs an analytic transfer derivative");
    const Eigen::Index p = dataset_dim(data);
    if (theta.size() != p) throw std::invalid_argument("empirical_fisher: theta dimension mismatch");

    Matrix sum = Matrix::Zero(p, p);
    for (const auto& obs : data) {
        const double hp = model.transfer_h_prime(obs.x.dot(theta));
        if (!std::isfinite(hp)) throw std::runtime_error("empirical_fisher: non-finite h'");
        sum.selfadjointView<Eigen::Lower>().rankUpdate(obs.x, hp);
    }
    sum = Matrix(sum.selfadjointView<Eigen::Lower>());
    FisherInfo info = FisherInfo::analytic(sum / static_cast<double>(data.size()));
    info.source = FisherInfo::Source::Empirical;
    info.n_samples = static_cast<long>(data.size());
    return info;
}

} // namespace isgd
