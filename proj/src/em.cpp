#include "modemfuse/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "modemfuse/errors.hpp"

namespace modemfuse {

namespace {

// Keeps 1/N0 finite after an exact-fit M-step; small enough that it never
// alters a genuinely estimated noise power.
constexpr double kNoiseFloor = 1e-300;

// Exponent matrix T(n, m) = -(1/N0) sum_l |r_{l,n} - a_l e^{j theta_l} I_m|^2,
// computed through the matched-filter collapse
//   sum_l |r_{l,n} - g_l I_m|^2 = C_n - 2 Re(conj(I_m) s_n) + G |I_m|^2,
// with s_n = sum_l conj(g_l) r_{l,n}, C_n = sum_l |r_{l,n}|^2, G = sum_l a_l^2.
RMatrix exponent_matrix(const CMatrix& samples, const RVector& gains, const RVector& phases,
                        double noise_power, const ConstellationSpec& spec) {
    const auto sensors = samples.rows();
    CVector channel(sensors);
    for (Eigen::Index l = 0; l < sensors; ++l) channel(l) = std::polar(gains(l), phases(l));

    const Eigen::RowVectorXcd matched = channel.adjoint() * samples;  // 1 x N
    const RVector col_energy = samples.colwise().squaredNorm().transpose();
    const double gain_energy = gains.squaredNorm();
    const RVector symbol_energy = spec.symbols.array().abs2();

    RMatrix exponents = matched.real().transpose() * spec.symbols.real().transpose() +
                        matched.imag().transpose() * spec.symbols.imag().transpose();
    exponents *= 2.0;
    exponents.colwise() -= col_energy;
    exponents.rowwise() -= (gain_energy * symbol_energy).transpose();
    exponents /= noise_power;
    return exponents;
}

double llf_from_exponents(const RMatrix& exponents, double noise_power, Eigen::Index sensors,
                          int symbol_count) {
    const auto block_length = exponents.rows();
    const RVector row_max = exponents.rowwise().maxCoeff();
    const RVector row_sum =
        (exponents.colwise() - row_max).array().exp().rowwise().sum().matrix();
    const double marginal = (row_max.array() + row_sum.array().log()).sum();
    const double llf = -static_cast<double>(block_length) * std::log(symbol_count) -
                       static_cast<double>(sensors * block_length) * std::log(noise_power) +
                       marginal;
    if (!std::isfinite(llf)) {
        for (Eigen::Index n = 0; n < block_length; ++n)
            if (!std::isfinite(row_max(n)) || !std::isfinite(std::log(row_sum(n))))
                throw NumericError("non-finite log-likelihood at sample n=" + std::to_string(n));
        throw NumericError("non-finite log-likelihood");
    }
    return llf;
}

PosteriorStats posteriors_from_exponents(const RMatrix& exponents,
                                         const ConstellationSpec& spec) {
    const RVector row_max = exponents.rowwise().maxCoeff();
    RMatrix alphas = (exponents.colwise() - row_max).array().exp();
    const RVector row_sum = alphas.rowwise().sum();
    // The maximizing entry is exp(0) = 1, so a zero row cannot occur.
    if (!(row_sum.array() >= 1.0).all())
        throw NumericError("posterior normalization underflow");
    alphas.array().colwise() /= row_sum.array();

    PosteriorStats stats;
    stats.symbol_means.resize(alphas.rows());
    stats.symbol_means.real() = alphas * spec.symbols.real();
    stats.symbol_means.imag() = alphas * spec.symbols.imag();
    stats.energy = (alphas * spec.symbols.array().abs2().matrix()).sum();
    stats.alphas = std::move(alphas);
    return stats;
}

void require_positive_noise(double noise_power) {
    if (!(noise_power > 0.0))
        throw NumericError("noise power must be positive, got " + std::to_string(noise_power));
}

}  // namespace

double log_likelihood(const ObservationBlock& block, const RVector& gains, const RVector& phases,
                      double noise_power, const ConstellationSpec& spec) {
    require_positive_noise(noise_power);
    if (gains.size() != block.sensor_count() || phases.size() != block.sensor_count())
        throw ConfigError("parameter dimensions do not match sensor count");
    const RMatrix exponents = exponent_matrix(block.samples, gains, phases, noise_power, spec);
    return llf_from_exponents(exponents, noise_power, block.samples.rows(), spec.size_M);
}

double log_likelihood(const ObservationBlock& block, const ChannelRealization& channel,
                      const ConstellationSpec& spec) {
    return log_likelihood(block, channel.gains, channel.phases, channel.noise_power, spec);
}

double log_likelihood(const ObservationBlock& block, const NuisanceEstimate& estimate,
                      const ConstellationSpec& spec) {
    return log_likelihood(block, estimate.gains_hat, estimate.phases_hat,
                          estimate.noise_power_hat, spec);
}

PosteriorStats e_step(const ObservationBlock& block, const NuisanceEstimate& estimate,
                      const ConstellationSpec& spec) {
    require_positive_noise(estimate.noise_power_hat);
    const RMatrix exponents = exponent_matrix(block.samples, estimate.gains_hat,
                                              estimate.phases_hat, estimate.noise_power_hat, spec);
    return posteriors_from_exponents(exponents, spec);
}

NuisanceEstimate m_step(const ObservationBlock& block, const PosteriorStats& stats) {
    if (!(stats.energy > 0.0))
        throw EstimatorError("degenerate statistics: posterior symbol energy is not positive");

    const int sensors = block.sensor_count();
    const auto block_length = static_cast<double>(block.block_length());

    NuisanceEstimate estimate;
    estimate.gains_hat.resize(sensors);
    estimate.phases_hat.resize(sensors);
    estimate.validity.assign(static_cast<std::size_t>(sensors), true);

    // correlation(l) = Upsilon^H r_l
    const CVector correlation = block.samples * stats.symbol_means.conjugate();
    CVector channel(sensors);
    for (int l = 0; l < sensors; ++l) {
        const Complex corr = correlation(l);
        if (std::abs(corr) == 0.0)
            throw EstimatorError("degenerate statistics: zero posterior correlation at sensor " +
                                 std::to_string(l));
        double theta = std::atan2(corr.imag(), corr.real());
        if (theta >= kPi) theta = -kPi;
        const double gain =
            (std::cos(theta) * corr.real() + std::sin(theta) * corr.imag()) / stats.energy;
        estimate.phases_hat(l) = theta;
        estimate.gains_hat(l) = gain;
        channel(l) = std::polar(gain, theta);
    }

    // Pooled noise via the same matched-filter collapse as the E-step.
    const Eigen::RowVectorXcd matched = channel.adjoint() * block.samples;
    const double cross = (matched * stats.symbol_means.conjugate()).value().real();
    const double residual = block.samples.squaredNorm() - 2.0 * cross +
                            estimate.gains_hat.squaredNorm() * stats.energy;
    estimate.noise_power_hat = residual / (sensors * block_length);
    return estimate;
}

InitResult initialize(const ObservationBlock& block, const ConstellationSpec& spec,
                      const EmOptions& options) {
    const int sensors = block.sensor_count();

    InitResult init;
    NuisanceEstimate& estimate = init.estimate;
    estimate.gains_hat.resize(sensors);
    estimate.phases_hat.resize(sensors);
    estimate.per_sensor_noise.resize(sensors);
    estimate.validity.assign(static_cast<std::size_t>(sensors), false);
    init.descriptor = "m2m4";

    RVector second_moments(sensors);
    for (int l = 0; l < sensors; ++l) {
        const auto row = block.samples.row(l).transpose();
        const M2m4Estimate m2m4 = m2m4_amplitude_noise(row, spec);
        estimate.gains_hat(l) = m2m4.gain_hat;
        estimate.per_sensor_noise(l) = m2m4.noise_hat;
        estimate.validity[static_cast<std::size_t>(l)] = m2m4.valid;
        second_moments(l) = sample_moments(row).m2;
    }

    const bool cross_constellation = !kth_power_applicable(spec);
    for (int l = 0; l < sensors; ++l) {
        const auto row = block.samples.row(l).transpose();
        estimate.phases_hat(l) =
            cross_constellation ? eighth_order_phase(row, spec) : kth_power_phase(row, spec);
    }
    init.descriptor += cross_constellation ? "+eighth-order" : "+kth-power";

    if (cross_constellation) {
        // The eighth-order statistic fixes the phase only modulo pi/4; the
        // constellation's symmetry interval is 2*pi/K. Restore the intended
        // output range by scoring the two rotations per sensor against the
        // per-sensor marginal likelihood (robust to the other sensors' wrap
        // state) at a provisional noise level.
        double provisional_noise = 0.0;
        int usable = 0;
        for (int l = 0; l < sensors; ++l) {
            if (!estimate.validity[static_cast<std::size_t>(l)]) continue;
            provisional_noise += estimate.per_sensor_noise(l);
            ++usable;
        }
        provisional_noise = usable > 0 ? provisional_noise / usable
                                       : std::max(second_moments.mean(), 1e-12) / 10.0;
        for (int l = 0; l < sensors; ++l) {
            ObservationBlock single;
            single.samples = block.samples.row(l);
            double best_llf = -std::numeric_limits<double>::infinity();
            double best_phase = estimate.phases_hat(l);
            for (int j = 0; j < 2; ++j) {
                RVector phase(1);
                phase(0) = estimate.phases_hat(l) + j * kPi / 4.0;
                const double llf = log_likelihood(single, estimate.gains_hat.segment(l, 1),
                                                  phase, provisional_noise, spec);
                if (llf > best_llf) {
                    best_llf = llf;
                    best_phase = phase(0);
                }
            }
            estimate.phases_hat(l) = best_phase;
        }
    }

    // Noise fusion; when no sensor produced a usable estimate, pick the N0
    // that maximizes the likelihood over a coarse logarithmic grid. The grid
    // is scored with per-sensor marginal likelihoods: the blind phases are
    // only known modulo the wrap interval per sensor, and a joint score at
    // relatively misrotated phases would push N0 toward the top of the grid.
    bool fallback_used = false;
    const auto grid_fallback = [&]() {
        fallback_used = true;
        const double mean_m2 = std::max(second_moments.mean(), 1e-12);
        const double lo = std::log(mean_m2 / 100.0);
        const double hi = std::log(mean_m2);
        double best_noise = mean_m2;
        double best_llf = -std::numeric_limits<double>::infinity();
        constexpr int kGridSize = 20;
        for (int i = 0; i < kGridSize; ++i) {
            const double candidate =
                std::exp(lo + (hi - lo) * static_cast<double>(i) / (kGridSize - 1));
            double llf = 0.0;
            for (int l = 0; l < sensors; ++l) {
                ObservationBlock single;
                single.samples = block.samples.row(l);
                llf += log_likelihood(single, estimate.gains_hat.segment(l, 1),
                                      estimate.phases_hat.segment(l, 1), candidate, spec);
            }
            if (llf > best_llf) {
                best_llf = llf;
                best_noise = candidate;
            }
        }
        return best_noise;
    };
    estimate.noise_power_hat = fuse_noise_estimates(estimate.per_sensor_noise, estimate.validity,
                                                    grid_fallback, options.noise_fusion);
    // Under the summed convention the fallback substitutes the grid value for
    // every sensor's unavailable estimate before the sum.
    if (fallback_used && options.noise_fusion == NoiseFusion::Sum)
        estimate.noise_power_hat *= sensors;
    if (fallback_used) init.descriptor += "+n0-grid";

    if (options.grid_refine) {
        // SNR gate on the per-sensor noise scale, whichever fusion produced
        // the estimate.
        const double per_sensor_noise_scale =
            options.noise_fusion == NoiseFusion::Sum ? estimate.noise_power_hat / sensors
                                                     : estimate.noise_power_hat;
        const double estimated_snr_db =
            10.0 * std::log10(estimate.gains_hat.array().square().mean() /
                              per_sensor_noise_scale);
        const double gate = options.gate_snr_db.value_or(estimated_snr_db);
        if (gate >= options.grid_refine_snr_threshold_db) {
            const double half_span = kPi / spec.symmetry_K;
            // The blind estimators recover each sensor's phase only modulo
            // the wrap interval, with an unknown multiple per sensor. A
            // per-sensor rotation is not a symmetry of the joint likelihood
            // (the symbols couple the sensors), so the relative multiples
            // matter whenever L > 1. The scored candidates therefore include
            // the full rotation ladder in addition to the fine local grid;
            // for cross constellations the ladder steps by the estimator's
            // pi/4 ambiguity instead of the 2*pi/K symmetry.
            const double ladder_step =
                cross_constellation ? kPi / spec.symmetry_K : 2.0 * kPi / spec.symmetry_K;
            const int ladder_count =
                static_cast<int>(std::lround(2.0 * kPi / ladder_step)) - 1;
            for (int l = 0; l < sensors; ++l) {
                const double base = estimate.phases_hat(l);
                std::vector<double> candidates;
                candidates.reserve(static_cast<std::size_t>(options.grid_points + ladder_count));
                for (int i = 0; i < options.grid_points; ++i)
                    candidates.push_back(base - half_span +
                                         2.0 * half_span * static_cast<double>(i) /
                                             options.grid_points);
                for (int j = 1; j <= ladder_count; ++j)
                    candidates.push_back(base + ladder_step * j);
                double best_phase = base;
                double best_llf = -std::numeric_limits<double>::infinity();
                RVector phases = estimate.phases_hat;
                for (double candidate : candidates) {
                    phases(l) = candidate;
                    const double llf = log_likelihood(block, estimate.gains_hat, phases,
                                                      estimate.noise_power_hat, spec);
                    if (llf > best_llf) {
                        best_llf = llf;
                        best_phase = candidate;
                    }
                }
                estimate.phases_hat(l) = best_phase;
            }
            init.descriptor += "+phase-grid";
        }
    }
    return init;
}

EmResult run_em(const ObservationBlock& block, const ConstellationSpec& spec,
                const NuisanceEstimate& init, const EmOptions& options) {
    if (!(options.stop_delta > 0.0)) throw ConfigError("stop_delta must be positive");
    if (options.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");

    EmResult result;
    NuisanceEstimate estimate = init;
    estimate.noise_power_hat = std::max(estimate.noise_power_hat, kNoiseFloor);

    RMatrix exponents = exponent_matrix(block.samples, estimate.gains_hat, estimate.phases_hat,
                                        estimate.noise_power_hat, spec);
    result.llf_trace.push_back(llf_from_exponents(exponents, estimate.noise_power_hat,
                                                  block.samples.rows(), spec.size_M));

    // An infinite stop_delta means "accept the initializer as converged":
    // zero iterations, likelihood evaluated at the starting point.
    result.converged = std::isinf(options.stop_delta);

    for (int iteration = 1; !result.converged && iteration <= options.max_iterations;
         ++iteration) {
        const PosteriorStats stats = posteriors_from_exponents(exponents, spec);
        try {
            NuisanceEstimate next = m_step(block, stats);
            next.noise_power_hat = std::max(next.noise_power_hat, kNoiseFloor);
            estimate = std::move(next);
        } catch (const EstimatorError&) {
            estimate.phases_hat.array() += kPi / (4.0 * spec.symmetry_K);
            result.init_used += "+degenerate-perturb";
        }
        exponents = exponent_matrix(block.samples, estimate.gains_hat, estimate.phases_hat,
                                    estimate.noise_power_hat, spec);
        result.llf_trace.push_back(llf_from_exponents(exponents, estimate.noise_power_hat,
                                                      block.samples.rows(), spec.size_M));

        // Relative improvement with the normalizer clamped to [1, N]: the
        // LLF magnitude is dominated by the -L N ln N0 offset, which carries
        // no per-sample information and must not loosen the criterion.
        const double previous = result.llf_trace[result.llf_trace.size() - 2];
        const double current = result.llf_trace.back();
        const double normalizer = std::clamp(std::abs(previous), 1.0,
                                             static_cast<double>(block.block_length()));
        if (std::abs(current - previous) < options.stop_delta * normalizer) {
            result.converged = true;
        }
    }

    result.estimate = std::move(estimate);
    result.final_llf = result.llf_trace.back();
    result.iterations = static_cast<int>(result.llf_trace.size()) - 1;
    return result;
}

EmResult run_em(const ObservationBlock& block, const ConstellationSpec& spec,
                const EmOptions& options) {
    const InitResult init = initialize(block, spec, options);
    EmResult best = run_em(block, spec, init.estimate, options);
    best.init_used = init.descriptor + best.init_used;
    for (int restart = 1; restart <= options.restarts; ++restart) {
        NuisanceEstimate perturbed = init.estimate;
        perturbed.phases_hat.array() +=
            kPi / spec.symmetry_K * static_cast<double>(restart) / (options.restarts + 1);
        EmResult candidate = run_em(block, spec, perturbed, options);
        if (candidate.final_llf > best.final_llf) {
            candidate.init_used =
                init.descriptor + "+restart-" + std::to_string(restart) + candidate.init_used;
            best = std::move(candidate);
        }
    }
    return best;
}

}  // namespace modemfuse
