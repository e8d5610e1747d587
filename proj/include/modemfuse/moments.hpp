#pragma once

#include <functional>
#include <vector>

#include "modemfuse/channel.hpp"
#include "modemfuse/constellation.hpp"
#include "modemfuse/types.hpp"

namespace modemfuse {

// Estimated nuisance parameters (gains, phases, noise power) for one block.
// Pre-fusion per-sensor noise estimates may be non-positive or undefined;
// the validity flags mark which ones are usable. The fused noise_power_hat
// is always positive.
struct NuisanceEstimate {
    RVector gains_hat;
    RVector phases_hat;
    double noise_power_hat{};
    RVector per_sensor_noise;
    std::vector<bool> validity;

    int sensor_count() const { return static_cast<int>(gains_hat.size()); }
};

struct SampleMoments {
    double m2{};  // mean |r|^2
    double m4{};  // mean |r|^4
};

struct M2m4Estimate {
    double gain_hat{};
    double noise_hat{};
    bool valid{};
};

enum class NoiseFusion { Mean, Sum };

SampleMoments sample_moments(const CVectorRef& samples);

// Moment inversion for one sensor:
//   a_hat  = ((2 M2^2 - M4) / (2 - E|I|^4))^(1/4)
//   N0_hat = M2 - a_hat^2
// A negative radicand leaves a_hat undefined; the all-signal fallback
// a_hat = sqrt(M2) is returned instead and the estimate is flagged invalid,
// as is any N0_hat <= 0.
M2m4Estimate m2m4_amplitude_noise(const CVectorRef& samples, const ConstellationSpec& spec);

// Combines the usable per-sensor noise estimates (mean by default, sum as the
// literal alternative); when none are usable, defers to the caller-supplied
// fallback.
double fuse_noise_estimates(const RVector& per_sensor_noise, const std::vector<bool>& validity,
                            const std::function<double()>& fallback,
                            NoiseFusion fusion = NoiseFusion::Mean);

// True when |E{conj(I)^K}| is large enough for the Kth-power statistic to
// carry phase. Square QAM sits at 0.6-0.7 and PSK at 1; cross 32-QAM at 0.19
// falls below the 0.25 bound and is routed to the eighth-order estimator.
bool kth_power_applicable(const ConstellationSpec& spec);

// Kth-power blind phase estimate for 2*pi/K rotationally symmetric
// constellations:
//   theta_hat = (1/K) arg( E{conj(I)^K} * sum_n r_n^K ),  wrapped to (-pi/K, pi/K].
// Throws EstimatorError for constellations where kth_power_applicable is
// false; use eighth_order_phase there.
double kth_power_phase(const CVectorRef& samples, const ConstellationSpec& spec);

// Eighth-order blind phase estimate for cross constellations:
//   theta_hat = (1/8) arg( conj(E{I^8}) * sum_n r_n^8 ),  wrapped to (-pi/8, pi/8].
// The residual pi/4 ambiguity is resolved downstream by likelihood-scored
// candidate rotations.
double eighth_order_phase(const CVectorRef& samples, const ConstellationSpec& spec);

// Closed-form ML estimators when the transmitted symbols are known:
//   theta_hat_l = atan2(Im(I^H r_l), Re(I^H r_l))
//   a_hat_l     = Re(exp(-j theta_hat_l) I^H r_l) / ||I||^2
//   N0_hat      = (1/(L N)) sum_{l,n} |r_{l,n} - a_hat_l exp(j theta_hat_l) I_n|^2
// Estimation decouples across sensors; the noise estimate is pooled.
NuisanceEstimate ml_known_symbols(const ObservationBlock& block, const CVector& symbols);

// Wraps an angle to the interval (-half_width, half_width].
double wrap_phase(double angle, double half_width);

}  // namespace modemfuse
