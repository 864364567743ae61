#pragma once

#include "ldos/kernel.hpp"
#include "ldos/linalg.hpp"
#include "ldos/models.hpp"
#include "ldos/spectral.hpp"

#include <cstddef>
#include <vector>

namespace ldos {

// p(k, j) = |⟨φ_k(σ)|φ_j⟩|²; rows index perturbed states, columns unperturbed.
struct TransitionMatrix {
    RealMatrix p;
};

TransitionMatrix transition_matrix(const SpectralData& unperturbed, const SpectralData& perturbed);

// (l, j) entry: Σ_{k : φ_k(σ) ∈ Δ_l} p(k, j). Shape M×N.
RealMatrix coarse_grain(const TransitionMatrix& t, const std::vector<double>& perturbed_phases, std::size_t bins);

struct BandAverage {
    RealMatrix kernel;                 // (m, l) = P(Δ_l | Δ_m); zero rows where counts[m] == 0
    std::vector<std::size_t> counts;   // N_m

    bool empty(std::size_t m) const { return counts[m] == 0; }
};

BandAverage band_average(const RealMatrix& coarse, const std::vector<double>& unperturbed_phases, std::size_t bins);

// Idealized circuit: eigenphases snapped to their band, no leakage.
Kernel kernel_ideal_binning(const MapPair& pair, std::size_t bins, const InitMode& init);

// Amplitude of phase-estimation outcome m for eigenphase φ under U|φ⟩ = e^{−iφ}|φ⟩:
// (1/M) Σ_t exp(−i(φ − 2πm/M) t).
cplx leakage_amplitude(double phase, std::size_t m, std::size_t bins);

// Closed form of the simulated circuit including leakage, in the two eigenbases.
Kernel kernel_circuit_faithful(const MapPair& pair, std::size_t bins, const InitMode& init);

} // namespace ldos
