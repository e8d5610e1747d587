#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "modemfuse/channel.hpp"
#include "modemfuse/errors.hpp"
#include "modemfuse/rng.hpp"
#include "test_util.hpp"

using namespace modemfuse;
using test_util::block_from;
using test_util::channel_from;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rayleigh gains have the configured average power") {
    // 2 sigma^2 = 1
    const FadingModel fading{std::sqrt(0.5)};
    RngStream rng = RngStream::derive(42, {1});
    double sum_sq = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const ChannelRealization channel = sample_channel(rng, 1, fading, 1.0);
        sum_sq += channel.gains(0) * channel.gains(0);
    }
    CHECK(sum_sq / draws == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("channel draws are independent across sensors") {
    const FadingModel fading{std::sqrt(0.5)};
    RngStream rng = RngStream::derive(43, {2});
    const int draws = 10000;
    Eigen::MatrixXd gains(draws, 4);
    for (int i = 0; i < draws; ++i) {
        const ChannelRealization channel = sample_channel(rng, 4, fading, 1.0);
        for (int l = 0; l < 4; ++l) gains(i, l) = channel.gains(l);
        for (int l = 0; l < 4; ++l) {
            CHECK(channel.phases(l) >= -kPi);
            CHECK(channel.phases(l) < kPi);
        }
    }
    for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
            const auto col_a = gains.col(a).array() - gains.col(a).mean();
            const auto col_b = gains.col(b).array() - gains.col(b).mean();
            const double corr = (col_a * col_b).sum() /
                                std::sqrt(col_a.square().sum() * col_b.square().sum());
            CHECK(std::abs(corr) < 0.05);
        }
    }
}

TEST_CASE("sample_channel rejects bad arguments") {
    const FadingModel fading{std::sqrt(0.5)};
    RngStream rng = RngStream::derive(1, {1});
    CHECK_THROWS_AS(sample_channel(rng, 0, fading, 1.0), ConfigError);
    CHECK_THROWS_AS(sample_channel(rng, 2, fading, 0.0), ConfigError);
    CHECK_THROWS_AS(sample_channel(rng, 2, fading, -1.0), ConfigError);
}

TEST_CASE("snr conversions") {
    const FadingModel unit{std::sqrt(0.5)};  // 2 sigma^2 = 1
    CHECK(snr_db(unit, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(snr_db(unit, std::pow(10.0, -0.5)) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(snr_db(1.0, 0.1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(noise_power_for_snr_db(5.0, 1.0) == doctest::Approx(0.316227766).epsilon(1e-8));
}

TEST_CASE("noiseless identity channel reproduces the symbols") {
    const ConstellationSpec spec = build_constellation(Format::Qam16);
    const ChannelRealization channel = channel_from({1.0}, {0.0}, 1e-30);
    RngStream rng = RngStream::derive(7, {3});
    const SynthesisResult result = synthesize(rng, spec, channel, 256);
    for (int n = 0; n < 256; ++n) {
        const Complex expected = spec.symbols(result.symbol_indices[static_cast<std::size_t>(n)]);
        CHECK(std::abs(result.block.samples(0, n) - expected) < 1e-12);
    }
}

TEST_CASE("zero-gain channel produces pure noise with the configured variance") {
    const ConstellationSpec spec = build_constellation(Format::Qam16);
    const ChannelRealization channel = channel_from({0.0}, {0.0}, 1.0);
    RngStream rng = RngStream::derive(8, {4});
    const SynthesisResult result = synthesize(rng, spec, channel, 100000);
    const double variance =
        result.block.samples.row(0).squaredNorm() / result.block.block_length();
    CHECK(variance == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("noiseless scaling channel applies the exact complex gain") {
    const ConstellationSpec spec = build_constellation(Format::Qam64);
    const ChannelRealization channel = channel_from({2.0}, {kPi / 6.0}, 1e-30);
    RngStream rng = RngStream::derive(9, {5});
    const SynthesisResult result = synthesize(rng, spec, channel, 64);
    const Complex gain = std::polar(2.0, kPi / 6.0);
    for (int n = 0; n < 64; ++n) {
        const Complex symbol = spec.symbols(result.symbol_indices[static_cast<std::size_t>(n)]);
        CHECK(std::abs(result.block.samples(0, n) / symbol - gain) < 1e-12);
    }
}

TEST_CASE("every sensor observes the same symbol sequence") {
    const ConstellationSpec spec = build_constellation(Format::Qam32);
    const ChannelRealization channel = channel_from({1.0, 0.5, 2.0}, {0.1, -1.0, 2.0}, 1e-30);
    RngStream rng = RngStream::derive(10, {6});
    const SynthesisResult result = synthesize(rng, spec, channel, 128);
    // With negligible noise, r_{l,n} / I_n must equal sensor l's gain for all n.
    for (int l = 0; l < 3; ++l) {
        const Complex gain = std::polar(channel.gains(l), channel.phases(l));
        for (int n = 0; n < 128; ++n) {
            const Complex symbol =
                spec.symbols(result.symbol_indices[static_cast<std::size_t>(n)]);
            CHECK(std::abs(result.block.samples(l, n) - gain * symbol) < 1e-12);
        }
    }
}

TEST_CASE("per-sensor second moment matches a^2 + N0") {
    const ConstellationSpec spec = build_constellation(Format::Qam16);
    const ChannelRealization channel = channel_from({1.3}, {0.4}, 0.25);
    RngStream rng = RngStream::derive(11, {7});
    const SynthesisResult result = synthesize(rng, spec, channel, 100000);
    const double m2 = result.block.samples.row(0).squaredNorm() / result.block.block_length();
    CHECK(m2 == doctest::Approx(1.3 * 1.3 + 0.25).epsilon(0.02));
}

TEST_CASE("identical streams give bit-identical blocks") {
    const ConstellationSpec spec = build_constellation(Format::Qam16);
    const FadingModel fading{std::sqrt(0.5)};
    const auto generate = [&]() {
        RngStream channel_rng = RngStream::derive(12345, {9, 0});
        RngStream data_rng = RngStream::derive(12345, {9, 1});
        const ChannelRealization channel = sample_channel(channel_rng, 2, fading, 0.5);
        return synthesize(data_rng, spec, channel, 200);
    };
    const SynthesisResult first = generate();
    const SynthesisResult second = generate();
    CHECK(first.symbol_indices == second.symbol_indices);
    for (int l = 0; l < 2; ++l)
        for (int n = 0; n < 200; ++n)
            CHECK(first.block.samples(l, n) == second.block.samples(l, n));
}

TEST_CASE("forked streams do not depend on parent consumption") {
    RngStream parent_a = RngStream::derive(99, {1});
    RngStream parent_b = RngStream::derive(99, {1});
    (void)parent_b.next_u64();
    (void)parent_b.next_u64();
    RngStream child_a = parent_a.fork(5);
    RngStream child_b = parent_b.fork(5);
    for (int i = 0; i < 16; ++i) CHECK(child_a.next_u64() == child_b.next_u64());
}

TEST_CASE("iq csv round trip is bit exact") {
    const ConstellationSpec spec = build_constellation(Format::Qam64);
    const ChannelRealization channel = channel_from({0.9, 1.7}, {0.3, -2.1}, 0.316);
    RngStream rng = RngStream::derive(13, {8});
    const SynthesisResult result = synthesize(rng, spec, channel, 50);

    const std::string path = temp_path("modemfuse_roundtrip.csv");
    write_iq_csv(result.block, path);
    const ObservationBlock loaded = load_iq_csv(path);
    REQUIRE(loaded.sensor_count() == 2);
    REQUIRE(loaded.block_length() == 50);
    for (int l = 0; l < 2; ++l)
        for (int n = 0; n < 50; ++n)
            CHECK(loaded.samples(l, n) == result.block.samples(l, n));
    std::filesystem::remove(path);
}

TEST_CASE("iq csv field mapping") {
    const std::string path = temp_path("modemfuse_single.csv");
    {
        std::ofstream out(path);
        out << "sensor,n,re,im\n";
        out << "0,0,1.0,-1.0\n";
    }
    const ObservationBlock block = load_iq_csv(path);
    REQUIRE(block.sensor_count() == 1);
    REQUIRE(block.block_length() == 1);
    CHECK(block.samples(0, 0) == Complex(1.0, -1.0));
    std::filesystem::remove(path);
}

TEST_CASE("ragged iq csv is rejected with context") {
    const std::string path = temp_path("modemfuse_ragged.csv");
    {
        std::ofstream out(path);
        out << "sensor,n,re,im\n";
        for (int n = 0; n < 4; ++n) out << "0," << n << ",1.0,0.0\n";
        for (int n = 0; n < 3; ++n) out << "1," << n << ",1.0,0.0\n";
    }
    CHECK_THROWS_WITH_AS(load_iq_csv(path), doctest::Contains("missing sample at sensor 1, n 3"),
                         InputError);
    std::filesystem::remove(path);
}

TEST_CASE("iq csv parse failures carry row context") {
    const std::string path = temp_path("modemfuse_bad.csv");
    {
        std::ofstream out(path);
        out << "sensor,n,re,im\n";
        out << "0,0,abc,0.0\n";
    }
    CHECK_THROWS_AS(load_iq_csv(path), InputError);

    {
        std::ofstream out(path);
        out << "sensor,n,re,im\n";
        out << "0,0,inf,0.0\n";
    }
    CHECK_THROWS_WITH_AS(load_iq_csv(path), doctest::Contains("non-finite"), InputError);

    {
        std::ofstream out(path);
        out << "re,im\n";
        out << "0,0\n";
    }
    CHECK_THROWS_AS(load_iq_csv(path), InputError);
    std::filesystem::remove(path);
}
