#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modemfuse/channel.hpp"
#include "modemfuse/constellation.hpp"
#include "modemfuse/moments.hpp"
#include "modemfuse/types.hpp"

namespace modemfuse {

// Posterior symbol statistics produced by the E-step: alphas(n, m) is the
// posterior probability that symbol m was sent at time n given all sensors'
// data, symbol_means(n) = sum_m alphas(n,m) I_m, and energy is the total
// posterior symbol energy sum_{n,m} alphas(n,m) |I_m|^2.
struct PosteriorStats {
    RMatrix alphas;
    CVector symbol_means;
    double energy{};
};

struct EmOptions {
    double stop_delta = 1e-4;
    int max_iterations = 500;
    int restarts = 0;

    bool grid_refine = true;
    double grid_refine_snr_threshold_db = 10.0;
    int grid_points = 16;
    // When set, the grid-refinement gate compares this (externally known)
    // SNR against the threshold instead of the estimate derived from the
    // moments; reproduction runs use it to mirror the simulation's true SNR.
    std::optional<double> gate_snr_db;

    // Summed per-sensor noise estimates, matching the printed initializer;
    // Mean stays available for fidelity experiments.
    NoiseFusion noise_fusion = NoiseFusion::Sum;
};

struct EmResult {
    NuisanceEstimate estimate;
    double final_llf{};
    std::vector<double> llf_trace;  // non-decreasing within tolerance
    int iterations{};               // llf_trace.size() - 1
    bool converged{};
    std::string init_used;
};

struct InitResult {
    NuisanceEstimate estimate;
    std::string descriptor;
};

// Marginalized log-likelihood of the block under one modulation hypothesis:
//   L(u) = -N ln M - L N ln N0
//          + sum_n ln sum_m exp( -(1/N0) sum_l |r_{l,n} - a_l e^{j theta_l} I_m|^2 )
// evaluated with per-sample log-sum-exp stabilization.
double log_likelihood(const ObservationBlock& block, const RVector& gains, const RVector& phases,
                      double noise_power, const ConstellationSpec& spec);
double log_likelihood(const ObservationBlock& block, const ChannelRealization& channel,
                      const ConstellationSpec& spec);
double log_likelihood(const ObservationBlock& block, const NuisanceEstimate& estimate,
                      const ConstellationSpec& spec);

// Posterior symbol probabilities at the current estimate. Every sensor
// contributes to every alphas(n, m); this is where the sensors' data fuses.
PosteriorStats e_step(const ObservationBlock& block, const NuisanceEstimate& estimate,
                      const ConstellationSpec& spec);

// Closed-form update maximizing the EM surrogate: per-sensor phase and gain
// from the posterior symbol means, then the pooled noise power. Throws
// EstimatorError on degenerate statistics (zero posterior energy or a zero
// posterior correlation, e.g. uniform posteriors on a symmetric
// constellation).
NuisanceEstimate m_step(const ObservationBlock& block, const PosteriorStats& stats);

// Method-of-moments initialization pipeline: per-sensor M2M4 gain/noise,
// fused noise (likelihood-scored grid fallback when every sensor's estimate
// is unusable), blind phase per sensor (Kth power, or eighth order for cross
// constellations), then optional likelihood-scored phase grid refinement
// when the estimated SNR clears the threshold.
InitResult initialize(const ObservationBlock& block, const ConstellationSpec& spec,
                      const EmOptions& options);

// EM iteration from a given starting point. Stops when the relative
// log-likelihood improvement |dL| / clamp(|L|, 1, N) falls below stop_delta
// or max_iterations is reached. A degenerate M-step perturbs the phases by
// pi/(4K) and continues.
EmResult run_em(const ObservationBlock& block, const ConstellationSpec& spec,
                const NuisanceEstimate& init, const EmOptions& options);

// initialize + run_em; with restarts > 0, additionally reruns from perturbed
// phase initializations and keeps the highest-likelihood result.
EmResult run_em(const ObservationBlock& block, const ConstellationSpec& spec,
                const EmOptions& options);

}  // namespace modemfuse
