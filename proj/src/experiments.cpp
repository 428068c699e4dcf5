#include "isgd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "isgd/asymptotics.hpp"
#include "isgd/csv.hpp"
#include "isgd/parallel.hpp"
#include "isgd/sgd_engine.hpp"
#include "isgd/simlab.hpp"

namespace isgd {

namespace {

using nlohmann::json;

constexpr std::uint64_t kMetaStream = 1000000007ULL; // shared design draws
const std::vector<double> kStudyQuantiles = {0.05, 0.5, 0.95};

Vector ones(int p) { return Vector::Ones(p); }

Vector normality_theta_star(int p) {
    Vector theta(p);
    for (int j = 1; j <= p; ++j) theta(j - 1) = 10.0 * std::exp(-2.0 * j);
    return theta;
}

std::ofstream open_out_file(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / name);
    if (!out) throw std::runtime_error("cannot write " + name + " under " + dir);
    return out;
}

void write_summary(const ExperimentIo& io, const std::string& name, const json& summary) {
    if (io.out_dir.empty()) return;
    auto out = open_out_file(io.out_dir, name + "_summary.json");
    out << summary.dump(2) << "\n";
}

double log_trace(const Matrix& m) { return std::log(m.trace()); }

// Per-replication results with divergence excluded from aggregation,
// mirroring how the diverged explicit runs are reported separately.
struct RepOutcomes {
    std::vector<std::optional<Vector>> finals;
    int diverged = 0;

    explicit RepOutcomes(int reps) : finals(static_cast<std::size_t>(reps)) {}

    std::vector<Vector> collect() {
        std::vector<Vector> ok;
        for (auto& f : finals) {
            if (f)
                ok.push_back(std::move(*f));
            else
                ++diverged;
        }
        return ok;
    }
};

SgdConfig stream_config(Method method, LearningRate rate, long niters) {
    SgdConfig config;
    config.method = method;
    config.rate = rate;
    config.order = DataOrder::Stream;
    config.niters = niters;
    return config;
}

// A replication that throws is recorded as failed (its result slot stays
// empty and is counted with the diverged runs); the experiment continues.
template <class Fn>
auto guarded(Fn&& fn) {
    return [fn = std::forward<Fn>(fn)](int r) {
        try {
            fn(r);
        } catch (const std::exception&) {
        }
    };
}

} // namespace

// ---------------------------------------------------------------------------
// variance_sweep
// ---------------------------------------------------------------------------

VarianceSweepResult run_variance_sweep(const VarianceSweepOptions& opt) {
    Rng meta = Rng::substream(opt.io.seed, kMetaStream);
    VarianceSweepResult result;
    result.eigenvalues = draw_diagonal_eigenvalues(opt.p, opt.eig_lo, opt.eig_hi, meta);
    const FisherInfo fisher = FisherInfo::analytic(Matrix(result.eigenvalues.asDiagonal()));
    const NaturalParamModel model = NaturalParamModel::normal_identity();
    const NormalLinearSpec spec{result.eigenvalues, ones(opt.p)};

    bool implicit_ok = true;
    for (std::size_t gi = 0; gi < opt.gamma1_grid.size(); ++gi) {
        const double gamma1 = opt.gamma1_grid[gi];
        RepOutcomes implicit_runs(opt.reps);
        RepOutcomes explicit_runs(opt.reps);
        RepOutcomes adagrad_runs(opt.reps);

        run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
            Rng rng = Rng::substream(opt.io.seed, gi * static_cast<std::size_t>(opt.reps) +
                                                      static_cast<std::size_t>(r));
            const Dataset data = gen_normal_linear(spec, opt.niters, rng);
            const FitResult imp = fit(
                data, model, stream_config(Method::Implicit, LearningRate::power_law(gamma1), opt.niters));
            if (!imp.diverged) implicit_runs.finals[static_cast<std::size_t>(r)] = imp.theta;
            const FitResult exp = fit(
                data, model, stream_config(Method::Explicit, LearningRate::safeguard(gamma1), opt.niters));
            if (!exp.diverged) explicit_runs.finals[static_cast<std::size_t>(r)] = exp.theta;
            const FitResult ada = fit(
                data, model, stream_config(Method::AdaGrad, LearningRate::constant(gamma1), opt.niters));
            if (!ada.diverged) adagrad_runs.finals[static_cast<std::size_t>(r)] = ada.theta;
        }));

        const AsympVariance sigma = sgd_asymptotic_variance(fisher, Matrix::Identity(opt.p, opt.p), gamma1);
        const double log_theo_sgd =
            sigma.valid ? log_trace(sigma.sigma) - std::log(static_cast<double>(opt.niters))
                        : std::numeric_limits<double>::quiet_NaN();
        const AsympVariance ada_sigma = adagrad_variance(fisher, gamma1);
        const double log_theo_ada =
            log_trace(ada_sigma.sigma) - 0.5 * std::log(static_cast<double>(opt.niters));

        const auto add_row = [&](const std::string& method, RepOutcomes& runs, double log_theo) {
            VarianceSweepRow row;
            row.gamma1 = gamma1;
            row.method = method;
            const auto finals = runs.collect();
            row.diverged = runs.diverged;
            row.log_trace_empirical = finals.size() >= 2
                                          ? log_trace(empirical_variance(finals))
                                          : std::numeric_limits<double>::quiet_NaN();
            row.log_trace_theoretical = log_theo;
            row.rel_error = std::abs(row.log_trace_empirical - log_theo) / std::abs(log_theo);
            result.rows.push_back(row);
            return row.rel_error;
        };
        const double implicit_rel = add_row("implicit", implicit_runs, log_theo_sgd);
        add_row("explicit_safeguard", explicit_runs, log_theo_sgd);
        add_row("adagrad", adagrad_runs, log_theo_ada);
        if (!(implicit_rel <= 0.25)) implicit_ok = false;
    }
    result.pass = implicit_ok;

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "variance_sweep.csv");
        out << "gamma1,method,log_trace_empirical,log_trace_theoretical,rel_error,diverged,reps\n";
        for (const auto& row : result.rows)
            out << format_double(row.gamma1) << ',' << row.method << ','
                << format_double(row.log_trace_empirical) << ','
                << format_double(row.log_trace_theoretical) << ',' << format_double(row.rel_error)
                << ',' << row.diverged << ',' << opt.reps << "\n";
        json summary = {{"experiment", "variance_sweep"},
                        {"pass", result.pass},
                        {"seed", opt.io.seed},
                        {"eigenvalues", std::vector<double>(result.eigenvalues.begin(),
                                                            result.eigenvalues.end())}};
        write_summary(opt.io, "variance_sweep", summary);
    }
    return result;
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------

StabilityResult run_stability(const StabilityOptions& opt) {
    Rng meta = Rng::substream(opt.io.seed, kMetaStream);
    const Vector eigs = draw_diagonal_eigenvalues(opt.p, opt.eig_lo, opt.eig_hi, meta);
    const NormalLinearSpec spec{eigs, ones(opt.p)};
    const NaturalParamModel model = NaturalParamModel::normal_identity();

    std::vector<int> explicit_diverged(static_cast<std::size_t>(opt.reps), 0);
    std::vector<int> implicit_diverged(static_cast<std::size_t>(opt.reps), 0);
    run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
        Rng rng = Rng::substream(opt.io.seed, static_cast<std::uint64_t>(r));
        const Dataset data = gen_normal_linear(spec, opt.niters, rng);
        const FitResult exp = fit(
            data, model,
            stream_config(Method::Explicit, LearningRate::power_law(opt.gamma1), opt.niters));
        explicit_diverged[static_cast<std::size_t>(r)] = exp.diverged ? 1 : 0;
        const FitResult imp = fit(
            data, model,
            stream_config(Method::Implicit, LearningRate::power_law(opt.gamma1), opt.niters));
        implicit_diverged[static_cast<std::size_t>(r)] = imp.diverged ? 1 : 0;
    }));

    StabilityResult result;
    const double reps = static_cast<double>(opt.reps);
    for (int flag : explicit_diverged) result.explicit_divergence_fraction += flag / reps;
    for (int flag : implicit_diverged) result.implicit_divergence_fraction += flag / reps;
    result.pass = result.explicit_divergence_fraction >= 0.5 &&
                  result.implicit_divergence_fraction == 0.0;

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "stability.csv");
        out << "method,divergence_fraction,gamma1,reps\n";
        out << "explicit," << format_double(result.explicit_divergence_fraction) << ','
            << format_double(opt.gamma1) << ',' << opt.reps << "\n";
        out << "implicit," << format_double(result.implicit_divergence_fraction) << ','
            << format_double(opt.gamma1) << ',' << opt.reps << "\n";
        write_summary(opt.io, "stability",
                      json{{"experiment", "stability"},
                           {"pass", result.pass},
                           {"seed", opt.io.seed},
                           {"explicit_divergence_fraction", result.explicit_divergence_fraction},
                           {"implicit_divergence_fraction", result.implicit_divergence_fraction}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// normality
// ---------------------------------------------------------------------------

NormalityResult run_normality(const NormalityOptions& opt) {
    Rng meta = Rng::substream(opt.io.seed, kMetaStream);
    const Vector eigs = draw_diagonal_eigenvalues(opt.p, opt.eig_lo, opt.eig_hi, meta);
    const FisherInfo fisher = FisherInfo::analytic(Matrix(eigs.asDiagonal()));
    const Vector theta_star = normality_theta_star(opt.p);
    const NormalLinearSpec spec{eigs, theta_star};
    const NaturalParamModel model = NaturalParamModel::normal_identity();

    NormalityResult result;
    result.pass = true;
    for (std::size_t gi = 0; gi < opt.gamma1_grid.size(); ++gi) {
        const double gamma1 = opt.gamma1_grid[gi];
        const AsympVariance sigma = sgd_asymptotic_variance(fisher, Matrix::Identity(opt.p, opt.p), gamma1);
        if (!sigma.valid)
            throw std::invalid_argument(
                "normality: 2 gamma1 F - I is not positive-definite for gamma1=" +
                std::to_string(gamma1) + "; raise eig_lo or gamma1");

        RepOutcomes runs(opt.reps);
        run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
            Rng rng = Rng::substream(opt.io.seed, gi * static_cast<std::size_t>(opt.reps) +
                                                      static_cast<std::size_t>(r));
            const Dataset data = gen_normal_linear(spec, opt.niters, rng);
            const FitResult res = fit(
                data, model,
                stream_config(Method::Implicit, LearningRate::power_law(gamma1), opt.niters));
            if (!res.diverged) runs.finals[static_cast<std::size_t>(r)] = res.theta;
        }));

        const auto finals = runs.collect();
        DiagnosticReport report;
        report.theoretical_variance = sigma.sigma;
        report.empirical_variance =
            finals.size() >= 2 ? Matrix(static_cast<double>(opt.niters) * empirical_variance(finals))
                               : Matrix();
        for (const auto& theta : finals)
            report.chisq_samples.push_back(chisq_statistic(theta, theta_star, sigma.sigma, opt.niters));

        NormalityRow row;
        row.gamma1 = gamma1;
        row.diverged = runs.diverged;
        const KsResult ks = ks_against_chisq(report.chisq_samples, opt.p);
        report.ks_statistic = ks.d;
        report.ks_pvalue = ks.pvalue;
        row.ks_d = ks.d;
        row.ks_pvalue = ks.pvalue;
        for (double s : report.chisq_samples)
            row.mean_statistic += s / static_cast<double>(report.chisq_samples.size());
        result.rows.push_back(row);
        result.reports.push_back(std::move(report));
        if (!(row.ks_pvalue > 0.01)) result.pass = false;
    }

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "normality.csv");
        out << "gamma1,ks_d,ks_pvalue,mean_statistic,dof,diverged,reps\n";
        for (const auto& row : result.rows)
            out << format_double(row.gamma1) << ',' << format_double(row.ks_d) << ','
                << format_double(row.ks_pvalue) << ',' << format_double(row.mean_statistic) << ','
                << opt.p << ',' << row.diverged << ',' << opt.reps << "\n";
        auto samples = open_out_file(opt.io.out_dir, "normality_chisq_samples.csv");
        samples << "gamma1,statistic\n";
        for (std::size_t gi = 0; gi < result.rows.size(); ++gi)
            for (double s : result.reports[gi].chisq_samples)
                samples << format_double(result.rows[gi].gamma1) << ',' << format_double(s) << "\n";
        write_summary(opt.io, "normality",
                      json{{"experiment", "normality"}, {"pass", result.pass}, {"seed", opt.io.seed}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// poisson_appendix
// ---------------------------------------------------------------------------

PoissonAppendixResult run_poisson_appendix(const PoissonAppendixOptions& opt) {
    const NaturalParamModel model = NaturalParamModel::poisson_log();
    const Vector theta_star = poisson_bivariate_theta_star();

    RepOutcomes implicit_runs(opt.reps);
    std::vector<double> explicit_distance(static_cast<std::size_t>(opt.reps));
    std::vector<double> implicit_distance(static_cast<std::size_t>(opt.reps));
    std::vector<int> explicit_diverged(static_cast<std::size_t>(opt.reps), 0);

    run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
        Rng rng = Rng::substream(opt.io.seed, static_cast<std::uint64_t>(r));
        const Dataset data = gen_poisson_bivariate(opt.niters, rng);
        const FitResult imp = fit(
            data, model,
            stream_config(Method::Implicit, LearningRate::power_law(opt.gamma1), opt.niters));
        if (!imp.diverged) implicit_runs.finals[static_cast<std::size_t>(r)] = imp.theta;
        implicit_distance[static_cast<std::size_t>(r)] =
            imp.theta.allFinite() ? (imp.theta - theta_star).norm()
                                  : std::numeric_limits<double>::infinity();
        const FitResult exp = fit(
            data, model,
            stream_config(Method::Explicit, LearningRate::power_law(opt.gamma1), opt.niters));
        explicit_diverged[static_cast<std::size_t>(r)] = exp.diverged ? 1 : 0;
        explicit_distance[static_cast<std::size_t>(r)] =
            exp.theta.allFinite() ? (exp.theta - theta_star).norm()
                                  : std::numeric_limits<double>::infinity();
    }));

    PoissonAppendixResult result;
    const FisherInfo fisher = FisherInfo::analytic(poisson_bivariate_fisher());
    const AsympVariance sigma = sgd_asymptotic_variance(fisher, Matrix::Identity(2, 2), opt.gamma1);
    result.scaled_theoretical = sigma.sigma / opt.gamma1;

    const auto finals = implicit_runs.collect();
    const double gamma_n = opt.gamma1 / static_cast<double>(opt.niters);
    result.scaled_empirical = empirical_variance(finals) / gamma_n;
    result.max_abs_deviation =
        (result.scaled_empirical - result.scaled_theoretical).cwiseAbs().maxCoeff();
    result.pass = result.max_abs_deviation <= 0.15;
    for (int flag : explicit_diverged) result.explicit_diverged += flag;
    for (double q : {0.25, 0.5, 0.75, 0.85, 0.95, 1.0}) {
        result.explicit_distance_quantiles[q] = quantile(explicit_distance, q);
        result.implicit_distance_quantiles[q] = quantile(implicit_distance, q);
    }

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "poisson_appendix.csv");
        out << "row,col,scaled_empirical,scaled_theoretical\n";
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out << i + 1 << ',' << j + 1 << ',' << format_double(result.scaled_empirical(i, j))
                    << ',' << format_double(result.scaled_theoretical(i, j)) << "\n";
        auto qout = open_out_file(opt.io.out_dir, "poisson_appendix_distance_quantiles.csv");
        qout << "quantile,explicit,implicit\n";
        for (const auto& [q, val] : result.explicit_distance_quantiles)
            qout << format_double(q) << ',' << format_double(val) << ','
                 << format_double(result.implicit_distance_quantiles.at(q)) << "\n";
        write_summary(opt.io, "poisson_appendix",
                      json{{"experiment", "poisson_appendix"},
                           {"pass", result.pass},
                           {"seed", opt.io.seed},
                           {"max_abs_deviation", result.max_abs_deviation},
                           {"explicit_diverged", result.explicit_diverged}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// averaging_study
// ---------------------------------------------------------------------------

AveragingStudyResult run_averaging_study(const AveragingStudyOptions& opt) {
    Rng meta = Rng::substream(opt.io.seed, kMetaStream);
    const Vector eigs = draw_diagonal_eigenvalues(opt.p, opt.eig_lo, opt.eig_hi, meta);
    const FisherInfo fisher = FisherInfo::analytic(Matrix(eigs.asDiagonal()));
    const NormalLinearSpec spec{eigs, ones(opt.p)};
    const NaturalParamModel model = NaturalParamModel::normal_identity();

    RepOutcomes runs(opt.reps);
    run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
        Rng rng = Rng::substream(opt.io.seed, static_cast<std::uint64_t>(r));
        const Dataset data = gen_normal_linear(spec, opt.niters, rng);
        const FitResult res =
            fit(data, model,
                stream_config(Method::ImplicitAvg,
                              LearningRate::power_law(opt.gamma1, opt.exponent), opt.niters));
        if (!res.diverged) runs.finals[static_cast<std::size_t>(r)] = res.avg_theta;
    }));

    AveragingStudyResult result;
    const auto finals = runs.collect();
    result.n_trace_empirical =
        static_cast<double>(opt.niters) * empirical_variance(finals).trace();
    result.trace_f_inverse = averaged_variance(fisher).sigma.trace();
    result.rel_error =
        std::abs(result.n_trace_empirical - result.trace_f_inverse) / result.trace_f_inverse;
    result.pass = result.rel_error <= 0.25;

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "averaging_study.csv");
        out << "n,reps,gamma1,exponent,n_trace_empirical,trace_f_inverse,rel_error\n";
        out << opt.niters << ',' << opt.reps << ',' << format_double(opt.gamma1) << ','
            << format_double(opt.exponent) << ',' << format_double(result.n_trace_empirical) << ','
            << format_double(result.trace_f_inverse) << ',' << format_double(result.rel_error)
            << "\n";
        write_summary(opt.io, "averaging_study",
                      json{{"experiment", "averaging_study"},
                           {"pass", result.pass},
                           {"seed", opt.io.seed},
                           {"rel_error", result.rel_error}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// adagrad_variance
// ---------------------------------------------------------------------------

AdagradVarianceResult run_adagrad_variance(const AdagradVarianceOptions& opt) {
    Rng meta = Rng::substream(opt.io.seed, kMetaStream);
    const Vector eigs = draw_diagonal_eigenvalues(opt.p, opt.eig_lo, opt.eig_hi, meta);
    const FisherInfo fisher = FisherInfo::analytic(Matrix(eigs.asDiagonal()));
    const NormalLinearSpec spec{eigs, ones(opt.p)};
    const NaturalParamModel model = NaturalParamModel::normal_identity();

    AdagradVarianceResult result;
    result.pass = true;
    for (std::size_t gi = 0; gi < opt.gamma1_grid.size(); ++gi) {
        const double gamma1 = opt.gamma1_grid[gi];
        RepOutcomes runs(opt.reps);
        run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
            Rng rng = Rng::substream(opt.io.seed, gi * static_cast<std::size_t>(opt.reps) +
                                                      static_cast<std::size_t>(r));
            const Dataset data = gen_normal_linear(spec, opt.niters, rng);
            const FitResult res = fit(
                data, model,
                stream_config(Method::AdaGrad, LearningRate::constant(gamma1), opt.niters));
            if (!res.diverged) runs.finals[static_cast<std::size_t>(r)] = res.theta;
        }));

        AdagradVarianceRow row;
        row.gamma1 = gamma1;
        const auto finals = runs.collect();
        row.sqrtn_trace_empirical =
            std::sqrt(static_cast<double>(opt.niters)) * empirical_variance(finals).trace();
        row.sqrtn_trace_theoretical = adagrad_variance(fisher, gamma1).sigma.trace();
        row.rel_error = std::abs(row.sqrtn_trace_empirical - row.sqrtn_trace_theoretical) /
                        row.sqrtn_trace_theoretical;
        result.rows.push_back(row);
        if (!(row.rel_error <= 0.25)) result.pass = false;
    }

    if (!opt.io.out_dir.empty()) {
        auto out = open_out_file(opt.io.out_dir, "adagrad_variance.csv");
        out << "gamma1,sqrtn_trace_empirical,sqrtn_trace_theoretical,rel_error,reps,n\n";
        for (const auto& row : result.rows)
            out << format_double(row.gamma1) << ',' << format_double(row.sqrtn_trace_empirical)
                << ',' << format_double(row.sqrtn_trace_theoretical) << ','
                << format_double(row.rel_error) << ',' << opt.reps << ',' << opt.niters << "\n";
        write_summary(opt.io, "adagrad_variance",
                      json{{"experiment", "adagrad_variance"}, {"pass", result.pass},
                           {"seed", opt.io.seed}});
    }
    return result;
}

// ---------------------------------------------------------------------------
// cox_study / mest_study
// ---------------------------------------------------------------------------

namespace {

// Quantile curves over per-replication squared-error trajectories; a
// replication's own theta_star is subtracted (they differ in mest_study).
StudyResult summarize_study(const std::vector<std::vector<Vector>>& trajs,
                            const std::vector<Vector>& theta_stars,
                            const std::vector<long>& iters, long early_iter) {
    StudyResult result;
    result.iters = iters;
    if (trajs.empty() || iters.empty()) {
        result.pass = false;
        result.ratio = std::numeric_limits<double>::quiet_NaN();
        return result;
    }
    std::vector<std::vector<double>> mse(trajs.size());
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        mse[r].resize(trajs[r].size());
        for (std::size_t t = 0; t < trajs[r].size(); ++t)
            mse[r][t] = (trajs[r][t] - theta_stars[r]).squaredNorm();
    }
    for (double q : kStudyQuantiles) result.mse_quantiles[q] = std::vector<double>(iters.size());
    std::vector<double> column(trajs.size());
    for (std::size_t t = 0; t < iters.size(); ++t) {
        for (std::size_t r = 0; r < trajs.size(); ++r) column[r] = mse[r][t];
        for (double q : kStudyQuantiles) result.mse_quantiles[q][t] = quantile(column, q);
    }

    std::size_t early_idx = 0;
    for (std::size_t t = 0; t < iters.size(); ++t)
        if (iters[t] <= early_iter) early_idx = t;
    result.median_early = result.mse_quantiles.at(0.5)[early_idx];
    result.median_late = result.mse_quantiles.at(0.5).back();
    result.ratio = result.median_late / result.median_early;
    result.pass = result.ratio < 0.25;
    return result;
}

void write_study_files(const ExperimentIo& io, const std::string& name, const StudyResult& result,
                       const json& extra) {
    if (io.out_dir.empty()) return;
    auto out = open_out_file(io.out_dir, name + ".csv");
    out << "iter,mse_q05,mse_q50,mse_q95\n";
    for (std::size_t t = 0; t < result.iters.size(); ++t)
        out << result.iters[t] << ',' << format_double(result.mse_quantiles.at(0.05)[t]) << ','
            << format_double(result.mse_quantiles.at(0.5)[t]) << ','
            << format_double(result.mse_quantiles.at(0.95)[t]) << "\n";
    json summary = {{"experiment", name},
                    {"pass", result.pass},
                    {"median_mse_early", result.median_early},
                    {"median_mse_late", result.median_late},
                    {"ratio", result.ratio},
                    {"lambda_min", result.lambda_min},
                    {"lambda_max", result.lambda_max},
                    {"diverged", result.diverged}};
    summary.update(extra);
    write_summary(io, name, summary);
}

} // namespace

StudyResult run_cox_study(const CoxStudyOptions& opt) {
    const long niters = 2 * opt.n;
    CoxSpec spec;
    spec.n = opt.n;
    spec.p = opt.p;
    const Vector theta_star = cox_theta_star(opt.p);

    std::vector<std::vector<Vector>> trajs(static_cast<std::size_t>(opt.reps));
    std::vector<long> iters;
    for (long it = opt.traj_stride; it <= niters; it += opt.traj_stride) iters.push_back(it);
    std::vector<double> lambda_lo(static_cast<std::size_t>(opt.reps), 1.0);
    std::vector<double> lambda_hi(static_cast<std::size_t>(opt.reps), 0.0);
    std::vector<int> diverged(static_cast<std::size_t>(opt.reps), 0);

    run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
        Rng rng = Rng::substream(opt.io.seed, static_cast<std::uint64_t>(r));
        const SurvivalDataset data = gen_cox(spec, rng);
        SgdConfig config;
        config.method = Method::Implicit;
        config.rate = LearningRate::power_law(opt.gamma1);
        config.seed = rng.next_u64();
        config.seed_set = true;
        config.niters = niters;
        config.traj_stride = opt.traj_stride;
        config.track_lambda = true;
        const FitResult res = cox_fit(data, config);
        if (res.diverged) {
            diverged[static_cast<std::size_t>(r)] = 1;
            return;
        }
        trajs[static_cast<std::size_t>(r)] = res.trajectory;
        for (double lam : res.lambda_history) {
            lambda_lo[static_cast<std::size_t>(r)] = std::min(lambda_lo[static_cast<std::size_t>(r)], lam);
            lambda_hi[static_cast<std::size_t>(r)] = std::max(lambda_hi[static_cast<std::size_t>(r)], lam);
        }
    }));

    std::vector<std::vector<Vector>> ok_trajs;
    std::vector<Vector> stars;
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        if (diverged[r] || trajs[r].size() != iters.size()) continue;
        ok_trajs.push_back(std::move(trajs[r]));
        stars.push_back(theta_star);
    }
    StudyResult result = summarize_study(ok_trajs, stars, iters, opt.n / 10);
    for (std::size_t r = 0; r < lambda_lo.size(); ++r) {
        if (diverged[r]) continue;
        result.lambda_min = std::min(result.lambda_min, lambda_lo[r]);
        result.lambda_max = std::max(result.lambda_max, lambda_hi[r]);
    }
    result.diverged = opt.reps - static_cast<int>(ok_trajs.size());
    result.pass = result.pass && result.diverged == 0;

    write_study_files(opt.io, "cox_study", result,
                      json{{"seed", opt.io.seed}, {"n", opt.n}, {"p", opt.p},
                           {"gamma1", opt.gamma1}, {"reps", opt.reps}});
    return result;
}

StudyResult run_mest_study(const MestStudyOptions& opt) {
    const long niters = 2 * opt.n;
    const NaturalParamModel model = mloss_as_model(RobustLoss::huber(opt.huber_delta));
    // Optimal-rate default: S = (1/n) I and v'(0) = P(|eps| <= delta)
    // under standard normal noise, so gamma1* = 1 / (v'(0) / n).
    const double vprime0 = std::erf(opt.huber_delta / std::sqrt(2.0));
    const double gamma1 =
        opt.gamma1 > 0 ? opt.gamma1
                       : optimal_gamma1({vprime0 / static_cast<double>(opt.n)});

    std::vector<std::vector<Vector>> trajs(static_cast<std::size_t>(opt.reps));
    std::vector<Vector> stars(static_cast<std::size_t>(opt.reps));
    std::vector<long> iters;
    for (long it = opt.traj_stride; it <= niters; it += opt.traj_stride) iters.push_back(it);
    std::vector<double> lambda_lo(static_cast<std::size_t>(opt.reps), 1.0);
    std::vector<double> lambda_hi(static_cast<std::size_t>(opt.reps), 0.0);
    std::vector<int> diverged(static_cast<std::size_t>(opt.reps), 0);

    run_replications(opt.reps, opt.io.jobs, guarded([&](int r) {
        Rng rng = Rng::substream(opt.io.seed, static_cast<std::uint64_t>(r));
        ContaminatedSpec spec;
        spec.n = opt.n;
        spec.p = opt.p;
        spec.contamination_rate = opt.contamination_rate;
        spec.outlier_value = opt.outlier_value;
        spec.theta_star = contaminated_theta_star(opt.p, rng);
        const Dataset data = gen_contaminated(spec, rng);

        SgdConfig config;
        config.method = Method::Implicit;
        config.rate = LearningRate::power_law(gamma1);
        config.order = DataOrder::SampleWithReplacement;
        config.seed = rng.next_u64();
        config.seed_set = true;
        config.niters = niters;
        config.traj_stride = opt.traj_stride;
        config.track_lambda = true;
        const FitResult res = fit(data, model, config);
        if (res.diverged) {
            diverged[static_cast<std::size_t>(r)] = 1;
            return;
        }
        trajs[static_cast<std::size_t>(r)] = res.trajectory;
        stars[static_cast<std::size_t>(r)] = spec.theta_star;
        for (double lam : res.lambda_history) {
            lambda_lo[static_cast<std::size_t>(r)] = std::min(lambda_lo[static_cast<std::size_t>(r)], lam);
            lambda_hi[static_cast<std::size_t>(r)] = std::max(lambda_hi[static_cast<std::size_t>(r)], lam);
        }
    }));

    std::vector<std::vector<Vector>> ok_trajs;
    std::vector<Vector> ok_stars;
    for (std::size_t r = 0; r < trajs.size(); ++r) {
        if (diverged[r] || trajs[r].size() != iters.size()) continue;
        ok_trajs.push_back(std::move(trajs[r]));
        ok_stars.push_back(std::move(stars[r]));
    }
    StudyResult result = summarize_study(ok_trajs, ok_stars, iters, opt.n / 10);
    for (std::size_t r = 0; r < lambda_lo.size(); ++r) {
        if (diverged[r]) continue;
        result.lambda_min = std::min(result.lambda_min, lambda_lo[r]);
        result.lambda_max = std::max(result.lambda_max, lambda_hi[r]);
    }
    result.diverged = opt.reps - static_cast<int>(ok_trajs.size());
    result.pass = result.pass && result.diverged == 0;

    write_study_files(opt.io, "mest_study", result,
                      json{{"seed", opt.io.seed}, {"n", opt.n}, {"p", opt.p},
                           {"gamma1", gamma1}, {"reps", opt.reps},
                           {"huber_delta", opt.huber_delta}});
    return result;
}

// ---------------------------------------------------------------------------
// dispatch by name
// ---------------------------------------------------------------------------

namespace {

double get_double(const std::map<std::string, std::string>& overrides, const std::string& key,
                  double fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : std::stod(it->second);
}

long get_long(const std::map<std::string, std::string>& overrides, const std::string& key,
              long fallback) {
    auto it = overrides.find(key);
    return it == overrides.end() ? fallback : std::stol(it->second);
}

std::vector<double> get_grid(const std::map<std::string, std::string>& overrides,
                             const std::string& key, std::vector<double> fallback) {
    auto it = overrides.find(key);
    if (it == overrides.end()) return fallback;
    std::vector<double> grid;
    std::istringstream stream(it->second);
    std::string field;
    while (std::getline(stream, field, ',')) grid.push_back(std::stod(field));
    if (grid.empty()) throw std::invalid_argument("empty value for " + key);
    return grid;
}

void check_known_keys(const std::map<std::string, std::string>& overrides,
                      std::initializer_list<const char*> known) {
    for (const auto& [key, value] : overrides) {
        (void)value;
        bool found = false;
        for (const char* k : known)
            if (key == k) found = true;
        if (!found) throw std::invalid_argument("unknown override key: " + key);
    }
}

void report(const std::string& name, const std::string& what, bool pass) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), what.c_str());
}

} // namespace

std::vector<std::string> experiment_names() {
    return {"variance_sweep", "normality",       "stability",        "poisson_appendix",
            "cox_study",      "mest_study",      "averaging_study",  "adagrad_variance"};
}

bool run_named_experiment(const std::string& name, const ExperimentIo& io,
                          const std::map<std::string, std::string>& overrides) {
    if (name == "variance_sweep") {
        check_known_keys(overrides, {"p", "reps", "niters", "gamma1", "eig_lo", "eig_hi"});
        VarianceSweepOptions opt;
        opt.io = io;
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1_grid = get_grid(overrides, "gamma1", opt.gamma1_grid);
        opt.eig_lo = get_double(overrides, "eig_lo", opt.eig_lo);
        opt.eig_hi = get_double(overrides, "eig_hi", opt.eig_hi);
        const auto result = run_variance_sweep(opt);
        for (const auto& row : result.rows)
            std::printf("  gamma1=%-5g %-18s log-trace emp=%.4f theo=%.4f rel=%.3f diverged=%d\n",
                        row.gamma1, row.method.c_str(), row.log_trace_empirical,
                        row.log_trace_theoretical, row.rel_error, row.diverged);
        report(name, "implicit log-trace within 25% of theory at every gamma1", result.pass);
        return result.pass;
    }
    if (name == "stability") {
        check_known_keys(overrides, {"p", "reps", "niters", "gamma1", "eig_lo", "eig_hi"});
        StabilityOptions opt;
        opt.io = io;
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1 = get_double(overrides, "gamma1", opt.gamma1);
        opt.eig_lo = get_double(overrides, "eig_lo", opt.eig_lo);
        opt.eig_hi = get_double(overrides, "eig_hi", opt.eig_hi);
        const auto result = run_stability(opt);
        std::printf("  explicit divergence %.1f%%, implicit %.1f%%\n",
                    100.0 * result.explicit_divergence_fraction,
                    100.0 * result.implicit_divergence_fraction);
        report(name, "explicit diverges >= 50%, implicit 0%", result.pass);
        return result.pass;
    }
    if (name == "normality") {
        check_known_keys(overrides, {"p", "reps", "niters", "gamma1", "eig_lo", "eig_hi"});
        NormalityOptions opt;
        opt.io = io;
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1_grid = get_grid(overrides, "gamma1", opt.gamma1_grid);
        opt.eig_lo = get_double(overrides, "eig_lo", opt.eig_lo);
        opt.eig_hi = get_double(overrides, "eig_hi", opt.eig_hi);
        const auto result = run_normality(opt);
        for (const auto& row : result.rows)
            std::printf("  gamma1=%-5g KS D=%.4f p-value=%.4f mean-stat=%.2f diverged=%d\n",
                        row.gamma1, row.ks_d, row.ks_pvalue, row.mean_statistic, row.diverged);
        report(name, "KS p-value > 0.01 against chi-squared at every gamma1", result.pass);
        return result.pass;
    }
    if (name == "poisson_appendix") {
        check_known_keys(overrides, {"reps", "niters", "gamma1"});
        PoissonAppendixOptions opt;
        opt.io = io;
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1 = get_double(overrides, "gamma1", opt.gamma1);
        const auto result = run_poisson_appendix(opt);
        std::printf("  (1/gamma_n) Var = [[%.3f, %.3f], [%.3f, %.3f]] vs diag(%.3f, %.3f)\n",
                    result.scaled_empirical(0, 0), result.scaled_empirical(0, 1),
                    result.scaled_empirical(1, 0), result.scaled_empirical(1, 1),
                    result.scaled_theoretical(0, 0), result.scaled_theoretical(1, 1));
        report(name, "gamma_n-scaled variance within +-0.15 entrywise", result.pass);
        return result.pass;
    }
    if (name == "averaging_study") {
        check_known_keys(overrides, {"p", "reps", "niters", "gamma1", "exponent", "eig_lo", "eig_hi"});
        AveragingStudyOptions opt;
        opt.io = io;
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1 = get_double(overrides, "gamma1", opt.gamma1);
        opt.exponent = get_double(overrides, "exponent", opt.exponent);
        opt.eig_lo = get_double(overrides, "eig_lo", opt.eig_lo);
        opt.eig_hi = get_double(overrides, "eig_hi", opt.eig_hi);
        const auto result = run_averaging_study(opt);
        std::printf("  n tr(Var) = %.3f vs tr(F^-1) = %.3f (rel %.3f)\n", result.n_trace_empirical,
                    result.trace_f_inverse, result.rel_error);
        report(name, "averaged variance within 25% of the efficient bound", result.pass);
        return result.pass;
    }
    if (name == "adagrad_variance") {
        check_known_keys(overrides, {"p", "reps", "niters", "gamma1", "eig_lo", "eig_hi"});
        AdagradVarianceOptions opt;
        opt.io = io;
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.niters = get_long(overrides, "niters", opt.niters);
        opt.gamma1_grid = get_grid(overrides, "gamma1", opt.gamma1_grid);
        opt.eig_lo = get_double(overrides, "eig_lo", opt.eig_lo);
        opt.eig_hi = get_double(overrides, "eig_hi", opt.eig_hi);
        const auto result = run_adagrad_variance(opt);
        for (const auto& row : result.rows)
            std::printf("  gamma1=%-5g sqrt(n) tr(Var) = %.3f vs %.3f (rel %.3f)\n", row.gamma1,
                        row.sqrtn_trace_empirical, row.sqrtn_trace_theoretical, row.rel_error);
        report(name, "sqrt(n)-rate variance within 25% at every gamma1", result.pass);
        return result.pass;
    }
    if (name == "cox_study") {
        check_known_keys(overrides, {"n", "p", "reps", "gamma1", "stride"});
        CoxStudyOptions opt;
        opt.io = io;
        opt.n = get_long(overrides, "n", opt.n);
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.gamma1 = get_double(overrides, "gamma1", opt.gamma1);
        opt.traj_stride = get_long(overrides, "stride", opt.traj_stride);
        const auto result = run_cox_study(opt);
        std::printf("  median MSE %.4f @ n/10 -> %.4f @ 2n (ratio %.3f), lambda in [%.4f, %.4f]\n",
                    result.median_early, result.median_late, result.ratio, result.lambda_min,
                    result.lambda_max);
        report(name, "median MSE at 2N below 25% of median MSE at N/10", result.pass);
        return result.pass;
    }
    if (name == "mest_study") {
        check_known_keys(overrides,
                         {"n", "p", "reps", "gamma1", "stride", "delta", "contamination", "outlier"});
        MestStudyOptions opt;
        opt.io = io;
        opt.n = get_long(overrides, "n", opt.n);
        opt.p = static_cast<int>(get_long(overrides, "p", opt.p));
        opt.reps = static_cast<int>(get_long(overrides, "reps", opt.reps));
        opt.gamma1 = get_double(overrides, "gamma1", opt.gamma1);
        opt.traj_stride = get_long(overrides, "stride", opt.traj_stride);
        opt.huber_delta = get_double(overrides, "delta", opt.huber_delta);
        opt.contamination_rate = get_double(overrides, "contamination", opt.contamination_rate);
        opt.outlier_value = get_double(overrides, "outlier", opt.outlier_value);
        const auto result = run_mest_study(opt);
        std::printf("  median MSE %.2f @ n/10 -> %.2f @ 2n (ratio %.3f), lambda in [%.4f, %.4f]\n",
                    result.median_early, result.median_late, result.ratio, result.lambda_min,
                    result.lambda_max);
        report(name, "median MSE at 2N below 25% of median MSE at N/10", result.pass);
        return result.pass;
    }
    throw std::invalid_argument("unknown experiment: " + name);
}

} // namespace isgd
