#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isgd/linalg.hpp"
#include "isgd/simlab.hpp"

namespace isgd {

/// Shared experiment knobs. out_dir empty = compute only, no files.
struct ExperimentIo {
    std::uint64_t seed = 42;
    int jobs = 1;
    std::string out_dir;
};

// ---------------------------------------------------------------------------
// Normal linear model, variance of the final iterate vs the 1/n theory.
// ---------------------------------------------------------------------------

struct VarianceSweepOptions {
    ExperimentIo io;
    int p = 20;
    long niters = 1500;
    int reps = 150;
    std::vector<double> gamma1_grid = {1.2, 4.0, 10.0};
    double eig_lo = 0.5;
    double eig_hi = 5.0;
};

struct VarianceSweepRow {
    double gamma1 = 0.0;
    std::string method;
    double log_trace_empirical = 0.0;
    double log_trace_theoretical = 0.0;
    double rel_error = 0.0;
    int diverged = 0;
};

struct VarianceSweepResult {
    std::vector<VarianceSweepRow> rows;
    Vector eigenvalues;
    bool pass = false; // implicit rows within 25% relative in log-trace
};

VarianceSweepResult run_variance_sweep(const VarianceSweepOptions& opt);

// ---------------------------------------------------------------------------
// Stability contrast: pure power-law explicit vs implicit at large gamma1.
// ---------------------------------------------------------------------------

struct StabilityOptions {
    ExperimentIo io;
    int p = 20;
    long niters = 1500;
    int reps = 150;
    double gamma1 = 10.0;
    double eig_lo = 0.5;
    double eig_hi = 5.0;
};

struct StabilityResult {
    double explicit_divergence_fraction = 0.0;
    double implicit_divergence_fraction = 0.0;
    bool pass = false; // explicit >= 50% diverged, implicit 0%
};

StabilityResult run_stability(const StabilityOptions& opt);

// ---------------------------------------------------------------------------
// Normality of the chi-squared statistic N d' Sigma^-1 d.
// ---------------------------------------------------------------------------

struct NormalityOptions {
    ExperimentIo io;
    int p = 5;
    long niters = 1200;
    int reps = 400;
    std::vector<double> gamma1_grid = {0.5, 1.0, 3.0};
    // Eigenvalues start at 1.5 so 2 gamma1 F - I stays positive-definite
    // down to gamma1 = 0.5.
    double eig_lo = 1.5;
    double eig_hi = 5.0;
};

struct NormalityRow {
    double gamma1 = 0.0;
    double ks_d = 0.0;
    double ks_pvalue = 0.0;
    double mean_statistic = 0.0;
    int diverged = 0;
};

struct NormalityResult {
    std::vector<NormalityRow> rows;
    std::vector<DiagnosticReport> reports; // one per gamma1, aligned with rows
    bool pass = false;                     // implicit KS p-value > 0.01 at every gamma1
};

NormalityResult run_normality(const NormalityOptions& opt);

// ---------------------------------------------------------------------------
// poisson_appendix study: bivariate Poisson design, gamma_n-scaled variance of implicit
// SGD against the closed form, plus the explicit-SGD distance quantiles.
// ---------------------------------------------------------------------------

struct PoissonAppendixOptions {
    ExperimentIo io;
    long niters = 20000;
    int reps = 100;
    double gamma1 = 10.0 / 3.0;
};

struct PoissonAppendixResult {
    Matrix scaled_empirical;   // (1/gamma_n) Var(theta_n)
    Matrix scaled_theoretical; // sigma / gamma1 = diag(0.8, 0.6154)
    double max_abs_deviation = 0.0;
    std::map<double, double> explicit_distance_quantiles;
    std::map<double, double> implicit_distance_quantiles;
    int explicit_diverged = 0;
    bool pass = false; // entrywise within +-0.15
};

PoissonAppendixResult run_poisson_appendix(const PoissonAppendixOptions& opt);

// ---------------------------------------------------------------------------
// Averaged implicit SGD efficiency: n tr Var(theta_bar) vs tr F^-1.
// ---------------------------------------------------------------------------

struct AveragingStudyOptions {
    ExperimentIo io;
    int p = 20;
    long niters = 100000;
    int reps = 100;
    double gamma1 = 1.0;
    double exponent = 0.7;
    double eig_lo = 0.5;
    double eig_hi = 5.0;
};

struct AveragingStudyResult {
    double n_trace_empirical = 0.0;
    double trace_f_inverse = 0.0;
    double rel_error = 0.0;
    bool pass = false; // within 25%
};

AveragingStudyResult run_averaging_study(const AveragingStudyOptions& opt);

// ---------------------------------------------------------------------------
// AdaGrad 1/sqrt(n) rate at two learning-rate parameters.
// ---------------------------------------------------------------------------

struct AdagradVarianceOptions {
    ExperimentIo io;
    int p = 20;
    long niters = 100000;
    int reps = 100;
    std::vector<double> gamma1_grid = {1.0, 4.0};
    double eig_lo = 0.5;
    double eig_hi = 5.0;
};

struct AdagradVarianceRow {
    double gamma1 = 0.0;
    double sqrtn_trace_empirical = 0.0;
    double sqrtn_trace_theoretical = 0.0;
    double rel_error = 0.0;
};

struct AdagradVarianceResult {
    std::vector<AdagradVarianceRow> rows;
    bool pass = false; // within 25% at every gamma1
};

AdagradVarianceResult run_adagrad_variance(const AdagradVarianceOptions& opt);

// ---------------------------------------------------------------------------
// Cox and M-estimation studies: MSE quantile curves with the
// median-MSE contraction check.
// ---------------------------------------------------------------------------

struct StudyResult {
    std::vector<long> iters;
    std::map<double, std::vector<double>> mse_quantiles; // 0.05 / 0.5 / 0.95
    double median_early = 0.0;                           // at n/10 iterations
    double median_late = 0.0;                            // at the final iteration
    double ratio = 0.0;
    double lambda_min = 1.0;
    double lambda_max = 0.0;
    int diverged = 0;
    bool pass = false; // ratio < 0.25, no divergence
};

struct CoxStudyOptions {
    ExperimentIo io;
    long n = 1000;
    int p = 20;
    int reps = 50;
    double gamma1 = 8.0;
    long traj_stride = 10;
};

StudyResult run_cox_study(const CoxStudyOptions& opt);

struct MestStudyOptions {
    ExperimentIo io;
    long n = 1000;
    int p = 50;
    int reps = 100;
    double huber_delta = 1.345;
    double contamination_rate = 0.05;
    double outlier_value = 10.0;
    double gamma1 = 0.0; // 0 = optimal-rate default n / v'(0)
    long traj_stride = 10;
};

StudyResult run_mest_study(const MestStudyOptions& opt);

/// Dispatches an experiment by name with key=value overrides applied to
/// the defaults above. Returns the pass flag; writes CSV/JSON when the
/// io.out_dir is set and prints one pass/fail line per bundled threshold.
bool run_named_experiment(const std::string& name, const ExperimentIo& io,
                          const std::map<std::string, std::string>& overrides);

std::vector<std::string> experiment_names();

} // namespace isgd
