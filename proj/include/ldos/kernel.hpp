#pragma once

#include "ldos/linalg.hpp"

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

namespace ldos {

// Initial state of the system register.
struct PureState {
    CVector amplitudes;
};
struct EigenstateIndex {
    std::size_t index; // position in the phase-sorted eigenbasis of U
};
struct MaximallyMixed {};

using InitMode = std::variant<PureState, EigenstateIndex, MaximallyMixed>;

// Joint outcome distribution P(m, l) of the two phase estimations together
// with its conditional form P(l|m). Rows whose marginal is ≤ 1e-14 are empty
// and their conditional row is left at zero.
struct Kernel {
    static constexpr double kEmptyMarginal = 1e-14;

    std::size_t bins = 0;
    RealMatrix joint;        // (m, l)
    RealMatrix conditional;  // (m, l), rows sum to 1 where non-empty
    std::vector<double> marginal;

    bool empty(std::size_t m) const { return marginal[m] <= kEmptyMarginal; }
};

Kernel make_kernel(RealMatrix joint);

// Builds a kernel from conditional rows and a marginal over m.
Kernel make_kernel(const RealMatrix& conditional, const std::vector<double>& marginal);

// Band Δ_l = [2πl/M − π/M, 2πl/M + π/M) on the circle containing `phase`.
// A phase on a band edge belongs to the higher band.
std::size_t band_index(double phase, std::size_t bins);

// Normalized distribution over wrapped bin offsets k ∈ [−⌊M/2⌋, ⌈M/2⌉).
struct LdosProfile {
    std::size_t bins = 0;
    std::vector<int> offsets;      // ascending
    std::vector<double> weights;
    std::optional<std::size_t> anchor; // source band m; empty when aggregated

    double phi(std::size_t i) const;   // 2π·offset/M
    double weight_at(int offset) const;
};

std::vector<int> wrapped_offsets(std::size_t bins);

// η_m(2πk/M) = Σ_l P(l|m) δ_{k,(l−m)}; throws DegenerateInputError for an empty row.
LdosProfile ldos_from_kernel(const Kernel& kernel, std::size_t m);

// Offset distribution pooled over all anchor bands, weighted by P(m).
LdosProfile aggregated_ldos(const Kernel& kernel);

} // namespace ldos
