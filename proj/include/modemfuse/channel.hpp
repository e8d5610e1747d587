#pragma once

#include <string>
#include <vector>

#include "modemfuse/constellation.hpp"
#include "modemfuse/rng.hpp"
#include "modemfuse/types.hpp"

namespace modemfuse {

// Rayleigh flat block fading: gains drawn with scale sigma, so the average
// channel power is E{a^2} = 2 sigma^2.
struct FadingModel {
    double rayleigh_scale{};
};

// Per-sensor channel state, either ground truth or an estimate: gains a_l,
// phases theta_l in [-pi, pi), and the complex noise variance N0 shared by
// all sensors.
struct ChannelRealization {
    RVector gains;
    RVector phases;
    double noise_power{};

    int sensor_count() const { return static_cast<int>(gains.size()); }
};

// L x N matrix of baseband samples; row l holds sensor l's block.
struct ObservationBlock {
    CMatrix samples;

    int sensor_count() const { return static_cast<int>(samples.rows()); }
    int block_length() const { return static_cast<int>(samples.cols()); }
};

struct SynthesisResult {
    ObservationBlock block;
    std::vector<int> symbol_indices;  // ground truth, shared by every sensor
};

// Independent Rayleigh gain and uniform [-pi, pi) phase per sensor.
ChannelRealization sample_channel(RngStream& rng, int sensor_count, const FadingModel& fading,
                                  double noise_power);

// r_{l,n} = a_l exp(j theta_l) I_n + w_{l,n}, with one symbol sequence shared
// by all sensors and complex Gaussian noise of total variance N0, independent
// across sensors and samples.
SynthesisResult synthesize(RngStream& rng, const ConstellationSpec& spec,
                           const ChannelRealization& channel, int block_length);

// Average SNR 2 sigma^2 / N0 in dB.
double snr_db(const FadingModel& fading, double noise_power);
// Instantaneous SNR a^2 / N0 in dB.
double snr_db(double gain, double noise_power);
// Noise power realizing a target average SNR for a given E{a^2} = 2 sigma^2.
double noise_power_for_snr_db(double snr_db_value, double avg_fading_power);

// IQ CSV interchange: header "sensor,n,re,im", one sample per row, sensors
// 0-indexed, complete L x N grid, values round-trip exact at 17 significant
// digits.
ObservationBlock load_iq_csv(const std::string& path);
void write_iq_csv(const ObservationBlock& block, const std::string& path);

}  // namespace modemfuse
