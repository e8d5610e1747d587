#include "modemfuse/channel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "modemfuse/errors.hpp"

namespace modemfuse {

ChannelRealization sample_channel(RngStream& rng, int sensor_count, const FadingModel& fading,
                                  double noise_power) {
    if (sensor_count < 1) throw ConfigError("sensor count must be at least 1");
    if (!(noise_power > 0.0)) throw ConfigError("noise power must be positive");
    if (!(fading.rayleigh_scale > 0.0)) throw ConfigError("Rayleigh scale must be positive");

    ChannelRealization channel;
    channel.gains.resize(sensor_count);
    channel.phases.resize(sensor_count);
    channel.noise_power = noise_power;
    for (int l = 0; l < sensor_count; ++l) {
        channel.gains(l) = rng.rayleigh(fading.rayleigh_scale);
        channel.phases(l) = rng.uniform(-kPi, kPi);
    }
    return channel;
}

SynthesisResult synthesize(RngStream& rng, const ConstellationSpec& spec,
                           const ChannelRealization& channel, int block_length) {
    if (block_length < 1) throw ConfigError("block length must be at least 1");
    const int sensors = channel.sensor_count();

    SynthesisResult result;
    result.symbol_indices.resize(static_cast<std::size_t>(block_length));
    for (int n = 0; n < block_length; ++n)
        result.symbol_indices[static_cast<std::size_t>(n)] =
            static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(spec.size_M)));

    CMatrix& samples = result.block.samples;
    samples.resize(sensors, block_length);
    for (int l = 0; l < sensors; ++l) {
        const Complex gain = std::polar(channel.gains(l), channel.phases(l));
        for (int n = 0; n < block_length; ++n) {
            const Complex symbol = spec.symbols(result.symbol_indices[static_cast<std::size_t>(n)]);
            samples(l, n) = gain * symbol + rng.complex_gaussian(channel.noise_power);
        }
    }
    return result;
}

double snr_db(const FadingModel& fading, double noise_power) {
    return 10.0 * std::log10(2.0 * fading.rayleigh_scale * fading.rayleigh_scale / noise_power);
}

double snr_db(double gain, double noise_power) {
    return 10.0 * std::log10(gain * gain / noise_power);
}

double noise_power_for_snr_db(double snr_db_value, double avg_fading_power) {
    return avg_fading_power / std::pow(10.0, snr_db_value / 10.0);
}

ObservationBlock load_iq_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open IQ file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw InputError("IQ file '" + path + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "sensor,n,re,im")
        throw InputError("IQ file '" + path + "': expected header 'sensor,n,re,im'");

    struct Entry {
        int sensor;
        int index;
        Complex value;
    };
    std::vector<Entry> entries;
    int max_sensor = -1;
    int max_index = -1;
    long line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        double parsed[4];
        for (int f = 0; f < 4; ++f) {
            if (!std::getline(fields, token, ','))
                throw InputError("IQ file '" + path + "' line " + std::to_string(line_number) +
                                 ": expected 4 comma-separated fields");
            try {
                std::size_t used = 0;
                parsed[f] = std::stod(token, &used);
                while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used])))
                    ++used;
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw InputError("IQ file '" + path + "' line " + std::to_string(line_number) +
                                 ": cannot parse field '" + token + "'");
            }
        }
        if (std::getline(fields, token, ','))
            throw InputError("IQ file '" + path + "' line " + std::to_string(line_number) +
                             ": expected exactly 4 fields");
        const int sensor = static_cast<int>(parsed[0]);
        const int index = static_cast<int>(parsed[1]);
        if (sensor < 0 || parsed[0] != sensor || index < 0 || parsed[1] != index)
            throw InputError("IQ file '" + path + "' line " + std::to_string(line_number) +
                             ": sensor and n must be non-negative integers");
        if (!std::isfinite(parsed[2]) || !std::isfinite(parsed[3]))
            throw InputError("IQ file '" + path + "' line " + std::to_string(line_number) +
                             ": non-finite sample at sensor " + std::to_string(sensor) + ", n " +
                             std::to_string(index));
        entries.push_back({sensor, index, Complex(parsed[2], parsed[3])});
        max_sensor = std::max(max_sensor, sensor);
        max_index = std::max(max_index, index);
    }
    if (entries.empty()) throw InputError("IQ file '" + path + "' has no samples");

    const int sensors = max_sensor + 1;
    const int length = max_index + 1;
    ObservationBlock block;
    block.samples.resize(sensors, length);
    RMatrix seen = RMatrix::Zero(sensors, length);
    for (const Entry& entry : entries) {
        if (seen(entry.sensor, entry.index) != 0.0)
            throw InputError("IQ file '" + path + "': duplicate sample at sensor " +
                             std::to_string(entry.sensor) + ", n " + std::to_string(entry.index));
        seen(entry.sensor, entry.index) = 1.0;
        block.samples(entry.sensor, entry.index) = entry.value;
    }
    for (int l = 0; l < sensors; ++l)
        for (int n = 0; n < length; ++n)
            if (seen(l, n) == 0.0)
                throw InputError("IQ file '" + path + "': dimension mismatch, missing sample at "
                                 "sensor " + std::to_string(l) + ", n " + std::to_string(n));
    return block;
}

void write_iq_csv(const ObservationBlock& block, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << "sensor,n,re,im\n";
    char buffer[128];
    for (int l = 0; l < block.sensor_count(); ++l) {
        for (int n = 0; n < block.block_length(); ++n) {
            const Complex value = block.samples(l, n);
            std::snprintf(buffer, sizeof(buffer), "%d,%d,%.17g,%.17g\n", l, n, value.real(),
                          value.imag());
            out << buffer;
        }
    }
    if (!out) throw InputError("failed writing IQ file '" + path + "'");
}

}  // namespace modemfuse
