#include "modemfuse/constellation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <utility>
#include <vector>

#include "modemfuse/errors.hpp"

namespace modemfuse {

namespace {

constexpr double kInvariantTol = 1e-12;

void check_invariants(const CVector& symbols, int symmetry_K) {
    const auto count = symbols.size();
    if (count < 2) throw ConfigError("constellation needs at least two symbols");
    if (symmetry_K < 1) throw ConfigError("symmetry order must be positive");

    const double avg_energy = symbols.squaredNorm() / static_cast<double>(count);
    if (std::abs(avg_energy - 1.0) > kInvariantTol)
        throw ConfigError("constellation is not normalized to unit average energy");

    for (Eigen::Index a = 0; a < count; ++a)
        for (Eigen::Index b = a + 1; b < count; ++b)
            if (std::abs(symbols(a) - symbols(b)) <= kInvariantTol)
                throw ConfigError("constellation symbols are not distinct");

    // Set invariance under rotation by 2*pi/K: every rotated point must land
    // on some original point.
    const Complex rot = std::polar(1.0, 2.0 * kPi / symmetry_K);
    for (Eigen::Index a = 0; a < count; ++a) {
        const Complex rotated = symbols(a) * rot;
        double best = 1e300;
        for (Eigen::Index b = 0; b < count; ++b)
            best = std::min(best, std::abs(rotated - symbols(b)));
        if (best > kInvariantTol)
            throw ConfigError("constellation is not 2*pi/K rotationally symmetric");
    }
}

CVector grid_points_scaled(const std::vector<std::pair<int, int>>& grid) {
    CVector symbols(static_cast<Eigen::Index>(grid.size()));
    double energy = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        symbols(static_cast<Eigen::Index>(i)) =
            Complex(static_cast<double>(grid[i].first), static_cast<double>(grid[i].second));
        energy += std::norm(symbols(static_cast<Eigen::Index>(i)));
    }
    symbols /= std::sqrt(energy / static_cast<double>(grid.size()));
    return symbols;
}

bool parse_int_prefix(const std::string& text, const std::string& suffix, int& value) {
    if (text.size() <= suffix.size()) return false;
    if (text.compare(text.size() - suffix.size(), suffix.size(), suffix) != 0) return false;
    const std::string digits = text.substr(0, text.size() - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                       [](unsigned char c) { return std::isdigit(c); }))
        return false;
    value = std::stoi(digits);
    return true;
}

}  // namespace

ConstellationSpec make_constellation(Format format, std::string name, CVector symbols,
                                     int symmetry_K) {
    check_invariants(symbols, symmetry_K);
    ConstellationSpec spec;
    spec.format = format;
    spec.name = std::move(name);
    spec.size_M = static_cast<int>(symbols.size());
    spec.symmetry_K = symmetry_K;
    spec.fourth_moment = fourth_moment_of(symbols);
    spec.kth_conj_moment = kth_conj_moment_of(symbols, symmetry_K);
    spec.eighth_moment = eighth_moment_of(symbols);
    spec.symbols = std::move(symbols);
    return spec;
}

ConstellationSpec make_rectangular_qam(int cols, int rows) {
    if (cols < 1 || rows < 1 || cols * rows < 2)
        throw ConfigError("rectangular QAM needs at least two grid points");
    // Row-major over the grid, top row first, to keep symbol order
    // bit-reproducible across runs.
    std::vector<std::pair<int, int>> grid;
    grid.reserve(static_cast<std::size_t>(cols) * rows);
    for (int row = 0; row < rows; ++row)
        for (int col = 0; col < cols; ++col)
            grid.emplace_back(2 * col - (cols - 1), (rows - 1) - 2 * row);
    const std::string name = std::to_string(cols * rows) + "qam";
    return make_constellation(Format::RectQam, name, grid_points_scaled(grid), 4);
}

ConstellationSpec make_cross_qam_32() {
    std::vector<std::pair<int, int>> grid;
    grid.reserve(32);
    for (int row = 0; row < 6; ++row) {
        for (int col = 0; col < 6; ++col) {
            const int x = 2 * col - 5;
            const int y = 5 - 2 * row;
            if (std::abs(x) == 5 && std::abs(y) == 5) continue;
            grid.emplace_back(x, y);
        }
    }
    return make_constellation(Format::Qam32, "32qam", grid_points_scaled(grid), 4);
}

ConstellationSpec make_psk(int order) {
    if (order < 2) throw ConfigError("PSK order must be at least 2");
    CVector symbols(order);
    for (int m = 0; m < order; ++m)
        symbols(m) = std::polar(1.0, kPi * (2.0 * m + 1.0) / order);
    return make_constellation(Format::Psk, std::to_string(order) + "psk", std::move(symbols),
                              order);
}

ConstellationSpec build_constellation(Format format) {
    switch (format) {
        case Format::Qam16: {
            auto spec = make_rectangular_qam(4, 4);
            spec.format = Format::Qam16;
            return spec;
        }
        case Format::Qam32:
            return make_cross_qam_32();
        case Format::Qam64: {
            auto spec = make_rectangular_qam(8, 8);
            spec.format = Format::Qam64;
            return spec;
        }
        default:
            throw ConfigError("format has no catalog entry; use the generic constructors");
    }
}

ConstellationSpec build_constellation(const std::string& name) {
    std::string lowered(name);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lowered == "16qam") return build_constellation(Format::Qam16);
    if (lowered == "32qam") return build_constellation(Format::Qam32);
    if (lowered == "64qam") return build_constellation(Format::Qam64);

    int order = 0;
    if (parse_int_prefix(lowered, "psk", order)) return make_psk(order);
    if (parse_int_prefix(lowered, "qam", order)) {
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
        if (side * side != order)
            throw ConfigError("unsupported format '" + name + "': non-square QAM sizes other "
                              "than 32 are not cataloged");
        return make_rectangular_qam(side, side);
    }
    throw ConfigError("unsupported format '" + name + "'");
}

ConstellationMoments cached_moments(const ConstellationSpec& spec) {
    return {spec.fourth_moment, spec.kth_conj_moment, spec.eighth_moment};
}

double fourth_moment_of(const CVector& symbols) {
    return symbols.array().abs2().square().sum() / static_cast<double>(symbols.size());
}

Complex kth_conj_moment_of(const CVector& symbols, int symmetry_K) {
    Complex acc{0.0, 0.0};
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
        Complex term{1.0, 0.0};
        const Complex base = std::conj(symbols(i));
        for (int k = 0; k < symmetry_K; ++k) term *= base;
        acc += term;
    }
    return acc / static_cast<double>(symbols.size());
}

Complex eighth_moment_of(const CVector& symbols) {
    Complex acc{0.0, 0.0};
    for (Eigen::Index i = 0; i < symbols.size(); ++i) {
        const Complex sq = symbols(i) * symbols(i);
        const Complex quad = sq * sq;
        acc += quad * quad;
    }
    return acc / static_cast<double>(symbols.size());
}

}  // namespace modemfuse
