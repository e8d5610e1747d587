#pragma once

#include <string>

#include "modemfuse/types.hpp"

namespace modemfuse {

enum class Format { Qam16, Qam32, Qam64, Psk, RectQam };

// A candidate modulation format: a unit-average-energy symbol set together
// with the precomputed moments consumed by the blind estimators and the
// likelihood code.
//
// Invariants (enforced at construction):
//   * (1/M) sum_m |I_m|^2 == 1 within 1e-12,
//   * the symbol set is invariant, as a set, under rotation by 2*pi/K,
//   * all M symbols are distinct.
struct ConstellationSpec {
    Format format{};
    std::string name;
    CVector symbols;         // M points, fixed deterministic order
    int size_M{};
    int symmetry_K{};        // rotational symmetry order: QAM -> 4, M-PSK -> M
    double fourth_moment{};  // E|I|^4
    Complex kth_conj_moment{};  // E{ conj(I)^K }
    Complex eighth_moment{};    // E{ I^8 }
};

struct ConstellationMoments {
    double fourth_moment{};
    Complex kth_conj_moment{};
    Complex eighth_moment{};
};

// Validates the invariants and fills in the cached moments.
ConstellationSpec make_constellation(Format format, std::string name, CVector symbols,
                                     int symmetry_K);

// Catalog formats wired to the CLI: Qam16, Qam32, Qam64.
ConstellationSpec build_constellation(Format format);

// Accepts "16qam", "32qam", "64qam", and the generic patterns "<M>psk" /
// "<M>qam" (square M). Throws ConfigError otherwise.
ConstellationSpec build_constellation(const std::string& name);

// M-PSK with symbols exp(j*pi*(2m+1)/M); matches the diagonal layout of the
// rectangular grids (4-PSK == 4-QAM).
ConstellationSpec make_psk(int order);

// cols x rows points on the odd-integer grid, scaled to unit average energy.
ConstellationSpec make_rectangular_qam(int cols, int rows);

// Standard cross constellation: 6x6 odd-integer grid minus the four corners.
ConstellationSpec make_cross_qam_32();

ConstellationMoments cached_moments(const ConstellationSpec& spec);

// Direct finite averages over a symbol list (the same quantities the cache
// stores, recomputed from scratch).
double fourth_moment_of(const CVector& symbols);
Complex kth_conj_moment_of(const CVector& symbols, int symmetry_K);
Complex eighth_moment_of(const CVector& symbols);

}  // namespace modemfuse
