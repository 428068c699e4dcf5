#include "isgd/simlab.hpp"

#include <cmath>
#include <stdexcept>

namespace isgd {

Vector draw_diagonal_eigenvalues(Eigen::Index p, double lo, double hi, Rng& rng) {
    if (!(lo > 0) || !(hi >= lo))
        throw std::invalid_argument("draw_diagonal_eigenvalues: need 0 < lo <= hi");
    Vector eigs(p);
    for (Eigen::Index i = 0; i < p; ++i) eigs(i) = rng.uniform(lo, hi);
    return eigs;
}

Dataset gen_normal_linear(const NormalLinearSpec& spec, long n, Rng& rng) {
    const Eigen::Index p = spec.eigenvalues.size();
    if (p == 0 || spec.theta_star.size() != p)
        throw std::invalid_argument("gen_normal_linear: inconsistent spec");
    const Vector sd = spec.eigenvalues.cwiseSqrt();
    Dataset data;
    data.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        Observation obs;
        obs.x.resize(p);
        for (Eigen::Index j = 0; j < p; ++j) obs.x(j) = sd(j) * rng.normal();
        obs.y = obs.x.dot(spec.theta_star) + rng.normal();
        data.push_back(std::move(obs));
    }
    return data;
}

Vector poisson_bivariate_theta_star() {
    Vector theta(2);
    theta << std::log(2.0), std::log(4.0);
    return theta;
}

Matrix poisson_bivariate_fisher() {
    const Vector theta = poisson_bivariate_theta_star();
    Matrix f = Matrix::Zero(2, 2);
    f(0, 0) = 0.2 * std::exp(theta(0));
    f(1, 1) = 0.2 * std::exp(theta(1));
    return f;
}

Dataset gen_poisson_bivariate(long n, Rng& rng) {
    const Vector theta = poisson_bivariate_theta_star();
    Dataset data;
    data.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        Observation obs;
        obs.x = Vector::Zero(2);
        const double u = rng.uniform01();
        if (u >= 0.6) obs.x(u < 0.8 ? 0 : 1) = 1.0;
        obs.y = static_cast<double>(rng.poisson(std::exp(obs.x.dot(theta))));
        data.push_back(std::move(obs));
    }
    return data;
}

Vector cox_theta_star(int p) {
    Vector theta(p);
    for (int k = 1; k <= p; ++k)
        theta(k - 1) = 2.0 * (k % 2 == 0 ? 1.0 : -1.0) * std::exp(-0.1 * k);
    return theta;
}

SurvivalDataset gen_cox(const CoxSpec& spec, Rng& rng) {
    const int p = spec.p;
    const Vector theta = spec.theta_star.size() == 0 ? cox_theta_star(p) : spec.theta_star;
    if (theta.size() != p) throw std::invalid_argument("gen_cox: theta_star dimension mismatch");

    // x ~ N(0, 0.2 U + I): shared standard normal times sqrt(0.2) plus
    // independent standard normals.
    const double shared_sd = std::sqrt(0.2);
    std::vector<SurvivalObservation> rows(static_cast<std::size_t>(spec.n));
    std::vector<double> times(static_cast<std::size_t>(spec.n));
    for (auto& row : rows) {
        row.x.resize(p);
        const double shared = rng.normal();
        for (int j = 0; j < p; ++j) row.x(j) = shared_sd * shared + rng.normal();
        const double eta = std::exp(std::min(row.x.dot(theta), 700.0));
        row.time = rng.exponential(eta);
        row.status = 1;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) times[i] = rows[i].time;

    if (spec.min_censor_prob > 0 && spec.censor_quantile > 0) {
        const double b = quantile(times, spec.censor_quantile);
        const double y_min = *std::min_element(times.begin(), times.end());
        // a such that the earliest time is censored with min_censor_prob.
        const double a = std::log(1.0 / spec.min_censor_prob - 1.0) / (b - y_min);
        for (auto& row : rows) {
            const double prob = 1.0 / (1.0 + std::exp(-a * (row.time - b)));
            if (rng.bernoulli(prob)) row.status = 0;
        }
    }
    return SurvivalDataset::from_unsorted(std::move(rows));
}

Vector contaminated_theta_star(int p, Rng& rng) {
    Vector theta(p);
    for (int j = 0; j < p; ++j) theta(j) = rng.normal();
    theta *= 6.0 * std::sqrt(static_cast<double>(p)) / theta.norm();
    return theta;
}

Dataset gen_contaminated(const ContaminatedSpec& spec, Rng& rng) {
    const int p = spec.p;
    if (spec.theta_star.size() != p)
        throw std::invalid_argument("gen_contaminated: theta_star must be set (see contaminated_theta_star)");
    if (spec.contamination_rate < 0 || spec.contamination_rate > 1)
        throw std::invalid_argument("gen_contaminated: contamination_rate must be in [0, 1]");
    const double sd = 1.0 / std::sqrt(static_cast<double>(spec.n));
    Dataset data;
    data.reserve(static_cast<std::size_t>(spec.n));
    for (long i = 0; i < spec.n; ++i) {
        Observation obs;
        obs.x.resize(p);
        for (int j = 0; j < p; ++j) obs.x(j) = sd * rng.normal();
        const double clean = obs.x.dot(spec.theta_star) + rng.normal();
        obs.y = rng.bernoulli(spec.contamination_rate) ? spec.outlier_value : clean;
        data.push_back(std::move(obs));
    }
    return data;
}

Matrix empirical_variance(const std::vector<Vector>& finals) {
    if (finals.size() < 2)
        throw std::invalid_argument("empirical_variance: need at least 2 replications");
    const Eigen::Index p = finals.front().size();
    Vector mean = Vector::Zero(p);
    for (const auto& v : finals) mean += v;
    mean /= static_cast<double>(finals.size());

    Matrix cov = Matrix::Zero(p, p);
    for (const auto& v : finals) {
        const Vector d = v - mean;
        cov.selfadjointView<Eigen::Lower>().rankUpdate(d, 1.0);
    }
    cov = Matrix(cov.selfadjointView<Eigen::Lower>());
    return cov / static_cast<double>(finals.size() - 1);
}

double chisq_statistic(const Vector& theta_hat, const Vector& theta_star, const Matrix& sigma,
                       long n_iters) {
    if (theta_hat.size() != theta_star.size() || sigma.rows() != theta_hat.size() ||
        sigma.cols() != theta_hat.size())
        throw std::invalid_argument("chisq_statistic: dimension mismatch");
    const Vector d = theta_hat - theta_star;
    Eigen::LDLT<Matrix> ldlt(sigma);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw std::invalid_argument("chisq_statistic: sigma must be positive-definite");
    const Vector solved = ldlt.solve(d);
    if ((sigma * solved - d).norm() > 1e-8 * std::max(1.0, d.norm()))
        throw std::invalid_argument("chisq_statistic: sigma is singular to working precision");
    return static_cast<double>(n_iters) * d.dot(solved);
}

std::map<double, std::vector<double>> mse_quantile_curves(
    const std::vector<std::vector<Vector>>& replication_trajectories, const Vector& theta_star,
    const std::vector<double>& quantiles) {
    if (replication_trajectories.empty())
        throw std::invalid_argument("mse_quantile_curves: no replications");
    const std::size_t len = replication_trajectories.front().size();
    for (const auto& traj : replication_trajectories)
        if (traj.size() != len)
            throw std::invalid_argument("mse_quantile_curves: trajectories differ in length");

    std::map<double, std::vector<double>> curves;
    for (double q : quantiles) curves[q] = std::vector<double>(len);

    std::vector<double> errors(replication_trajectories.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t r = 0; r < replication_trajectories.size(); ++r)
            errors[r] = (replication_trajectories[r][t] - theta_star).squaredNorm();
        for (double q : quantiles) curves[q][t] = quantile(errors, q);
    }
    return curves;
}

} // namespace isgd
