#pragma once

#include <vector>

#include "isgd/sgd_engine.hpp"

namespace isgd {

struct SurvivalObservation {
    Vector x;
    double time = 0.0;
    int status = 1; // 1 = failure observed, 0 = censored
};

/// Survival data sorted ascending by time (stable, so ties keep input
/// order). Risk sets are R_i = {i, ..., N} by construction.
struct SurvivalDataset {
    std::vector<SurvivalObservation> obs;

    static SurvivalDataset from_unsorted(std::vector<SurvivalObservation> rows);

    std::size_t size() const { return obs.size(); }
    Eigen::Index dim() const;
};

/// eta_i = exp(x_i'theta), suffix sums over risk sets, and the
/// H_i = sum_{j <= i} d_j / (sum_{k >= j} eta_k) terms, all in O(N).
/// `finite` is false when some eta overflowed.
struct HazardTerms {
    Vector eta;
    Vector cum_eta; // cum_eta(j) = sum_{k >= j} eta_k
    Vector H;
    bool finite = true;
};

HazardTerms compute_hazard_terms(const SurvivalDataset& data, const Vector& theta);

/// Full-data score sum_i [d_i - H_i(theta) eta_i(theta)] x_i.
Vector cox_full_score(const SurvivalDataset& data, const Vector& theta);

/// One explicit SGD step on sampled index i (0-based):
/// theta += gamma_n w C x_i with w = d_i - H_i eta_i at the current iterate.
StepOutcome cox_explicit_step(SgdState& state, const SurvivalDataset& data,
                              const LearningRate& rate, std::size_t i);

/// Implicit counterpart: H_i is frozen at the current iterate, which makes
/// ell'(eta) = d_i - H_i e^eta decreasing, and the engine's fixed-point
/// solver applies.
StepOutcome cox_implicit_step(SgdState& state, const SurvivalDataset& data,
                              const LearningRate& rate, std::size_t i);

/// Driver with per-step index sampled uniformly from {1..N}; hazard terms
/// are recomputed each step at the current iterate.
FitResult cox_fit(const SurvivalDataset& data, const SgdConfig& config);

} // namespace isgd
