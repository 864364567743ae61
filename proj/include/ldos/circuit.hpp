#pragma once

#include "ldos/kernel.hpp"
#include "ldos/linalg.hpp"
#include "ldos/models.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ldos {

struct CircuitConfig {
    std::size_t m_bins = 8;
    InitMode init = MaximallyMixed{};
    std::size_t shots = 0;
    std::uint64_t seed = 0;
};

// Non-fatal remarks about a configuration (e.g. more bins than levels).
std::vector<std::string> circuit_warnings(const CircuitConfig& cfg, std::size_t dimension);

struct ShotRecord {
    std::size_t m = 0;
    std::size_t l = 0;
    std::uint64_t shot_index = 0;

    friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

// Outcome of one ancilla measurement: probability and normalized register
// state after collapse (empty when the probability is exactly zero).
struct MeasurementBranch {
    double probability = 0.0;
    CVector state;
};

// Statevector phase estimation on an M-level ancilla: uniform superposition,
// controlled U^t built from cached binary powers U^{2^k}, then the Fourier
// transform on the ancilla, which maps eigenphase 2πm/M to outcome m.
class PhaseEstimator {
public:
    PhaseEstimator(const UnitaryOperator& u, std::size_t bins);

    std::size_t bins() const { return bins_; }
    std::size_t dimension() const { return dimension_; }

    // Throws PreconditionError unless `state` has unit norm within 1e-10.
    std::vector<MeasurementBranch> measure(std::span<const cplx> state) const;

private:
    std::size_t bins_;
    std::size_t dimension_;
    std::vector<CMatrix> powers_; // U^{2^k}
    CMatrix fourier_;
};

std::vector<MeasurementBranch> pe_measure(const UnitaryOperator& u, std::span<const cplx> state, std::size_t bins);

// Per-shot random stream derived from (seed, shot_index) only.
std::mt19937_64 shot_stream(std::uint64_t seed, std::uint64_t shot_index);

// Two successive phase estimations (on U, then on U(σ)) with the intermediate
// measurement and ancilla reset.
class CircuitSimulator {
public:
    CircuitSimulator(const MapPair& pair, CircuitConfig cfg);

    const CircuitConfig& config() const { return cfg_; }

    // One circuit execution, simulated from scratch.
    ShotRecord run_shot(std::uint64_t shot_index) const;

    // cfg.shots executions. Branch distributions are computed once per
    // distinct initial state; results equal run_shot(i) for each index i.
    std::vector<ShotRecord> sample() const;

    // Exact P(m, l) by propagating every measurement branch.
    Kernel exact_joint_distribution() const;

private:
    struct BranchTable {
        std::vector<double> first;  // P(m)
        RealMatrix second;          // P(l | m)
    };

    CVector initial_state(std::size_t basis_index) const;
    std::size_t draw_basis_index(std::mt19937_64& rng) const;
    BranchTable branch_table(std::span<const cplx> psi) const;
    std::size_t distinct_initial_states() const;

    const MapPair* pair_;
    CircuitConfig cfg_;
    PhaseEstimator stage_one_;
    PhaseEstimator stage_two_;
};

ShotRecord run_shot(const MapPair& pair, const CircuitConfig& cfg, std::uint64_t shot_index);
Kernel exact_joint_distribution(const MapPair& pair, const CircuitConfig& cfg);

// Inverse-CDF draw from a discrete distribution.
std::size_t sample_index(std::span<const double> probabilities, std::mt19937_64& rng);

} // namespace ldos
