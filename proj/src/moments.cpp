#include "modemfuse/moments.hpp"

#include <cmath>

#include "modemfuse/errors.hpp"

namespace modemfuse {

namespace {

// Minimum |E{conj(I)^K}| for the Kth-power statistic: between the cross
// 32-QAM value (0.19) and the square QAM values (>= 0.6).
constexpr double kKthMomentFloor = 0.25;
// Minimum |E{I^8}| for the eighth-order statistic.
constexpr double kEighthMomentFloor = 0.05;

}  // namespace

bool kth_power_applicable(const ConstellationSpec& spec) {
    return std::abs(spec.kth_conj_moment) >= kKthMomentFloor;
}

SampleMoments sample_moments(const CVectorRef& samples) {
    const auto count = static_cast<double>(samples.size());
    SampleMoments moments;
    moments.m2 = samples.array().abs2().sum() / count;
    moments.m4 = samples.array().abs2().square().sum() / count;
    return moments;
}

M2m4Estimate m2m4_amplitude_noise(const CVectorRef& samples, const ConstellationSpec& spec) {
    if (std::abs(2.0 - spec.fourth_moment) < 1e-12)
        throw ConfigError("M2M4 estimator undefined: constellation fourth moment equals 2");

    const SampleMoments moments = sample_moments(samples);
    const double radicand = 2.0 * moments.m2 * moments.m2 - moments.m4;

    M2m4Estimate estimate;
    if (radicand < 0.0) {
        // Amplitude undefined; treat the block as all signal and flag it.
        estimate.gain_hat = std::sqrt(moments.m2);
        estimate.noise_hat = moments.m2 - estimate.gain_hat * estimate.gain_hat;
        estimate.valid = false;
        return estimate;
    }
    estimate.gain_hat = std::pow(radicand / (2.0 - spec.fourth_moment), 0.25);
    estimate.noise_hat = moments.m2 - estimate.gain_hat * estimate.gain_hat;
    estimate.valid = estimate.noise_hat > 0.0;
    return estimate;
}

double fuse_noise_estimates(const RVector& per_sensor_noise, const std::vector<bool>& validity,
                            const std::function<double()>& fallback, NoiseFusion fusion) {
    if (per_sensor_noise.size() < 1) throw ConfigError("need at least one sensor");
    if (static_cast<std::size_t>(per_sensor_noise.size()) != validity.size())
        throw ConfigError("validity flags do not match sensor count");

    double sum = 0.0;
    int usable = 0;
    for (Eigen::Index l = 0; l < per_sensor_noise.size(); ++l) {
        if (!validity[static_cast<std::size_t>(l)]) continue;
        sum += per_sensor_noise(l);
        ++usable;
    }
    if (usable == 0) return fallback();
    // Sum imputes the mean of the usable estimates for flagged sensors, so
    // the result always carries L terms.
    if (fusion == NoiseFusion::Sum)
        return sum / usable * static_cast<double>(per_sensor_noise.size());
    return sum / usable;
}

double wrap_phase(double angle, double half_width) {
    double wrapped = std::remainder(angle, 2.0 * half_width);
    if (wrapped <= -half_width) wrapped += 2.0 * half_width;
    return wrapped;
}

namespace {

double power_phase(const CVectorRef& samples, int order, Complex moment_weight) {
    Complex acc{0.0, 0.0};
    for (Eigen::Index n = 0; n < samples.size(); ++n) {
        Complex term{1.0, 0.0};
        for (int k = 0; k < order; ++k) term *= samples(n);
        acc += term;
    }
    return std::arg(moment_weight * acc) / order;
}

}  // namespace

double kth_power_phase(const CVectorRef& samples, const ConstellationSpec& spec) {
    if (!kth_power_applicable(spec))
        throw EstimatorError("Kth-power phase estimator inapplicable: E{conj(I)^K} too small "
                             "for " + spec.name);
    const double raw = power_phase(samples, spec.symmetry_K, spec.kth_conj_moment);
    return wrap_phase(raw, kPi / spec.symmetry_K);
}

double eighth_order_phase(const CVectorRef& samples, const ConstellationSpec& spec) {
    if (std::abs(spec.eighth_moment) < kEighthMomentFloor)
        throw EstimatorError("eighth-order phase estimator inapplicable: E{I^8} vanishes for " +
                             spec.name);
    const double raw = power_phase(samples, 8, std::conj(spec.eighth_moment));
    return wrap_phase(raw, kPi / 8.0);
}

NuisanceEstimate ml_known_symbols(const ObservationBlock& block, const CVector& symbols) {
    if (symbols.size() != block.block_length())
        throw ConfigError("symbol vector length does not match block length");
    const double symbol_energy = symbols.squaredNorm();
    if (!(symbol_energy > 0.0)) throw EstimatorError("degenerate input: all-zero symbol vector");

    const int sensors = block.sensor_count();
    const auto samples_per_sensor = static_cast<double>(block.block_length());

    NuisanceEstimate estimate;
    estimate.gains_hat.resize(sensors);
    estimate.phases_hat.resize(sensors);
    estimate.validity.assign(static_cast<std::size_t>(sensors), true);

    double residual = 0.0;
    for (int l = 0; l < sensors; ++l) {
        // I^H r_l; row of a column-major matrix, so accumulate explicitly.
        Complex corr{0.0, 0.0};
        for (int n = 0; n < block.block_length(); ++n)
            corr += std::conj(symbols(n)) * block.samples(l, n);
        double theta = std::atan2(corr.imag(), corr.real());
        if (theta >= kPi) theta = -kPi;  // [-pi, pi) convention
        const double gain =
            (std::cos(theta) * corr.real() + std::sin(theta) * corr.imag()) / symbol_energy;
        estimate.phases_hat(l) = theta;
        estimate.gains_hat(l) = gain;

        const Complex channel = std::polar(gain, theta);
        for (int n = 0; n < block.block_length(); ++n)
            residual += std::norm(block.samples(l, n) - channel * symbols(n));
    }
    estimate.noise_power_hat = residual / (sensors * samples_per_sensor);
    return estimate;
}

}  // namespace modemfuse
