#include "ldos/circuit.hpp"

#include "ldos/errors.hpp"

#include <cmath>
#include <string>

namespace ldos {

std::vector<std::string> circuit_warnings(const CircuitConfig& cfg, std::size_t dimension) {
    std::vector<std::string> out;
    if (cfg.m_bins > dimension) {
        out.push_back("m_bins (" + std::to_string(cfg.m_bins) + ") exceeds the Hilbert space dimension (" +
                      std::to_string(dimension) + "); most bands will be empty");
    }
    if ((cfg.m_bins & (cfg.m_bins - 1)) != 0) {
        out.push_back("m_bins is not a power of two; the ancilla is not a whole number of qubits");
    }
    return out;
}

PhaseEstimator::PhaseEstimator(const UnitaryOperator& u, std::size_t bins)
    : bins_(bins), dimension_(u.dimension()), fourier_(dft(bins).matrix()) {
    powers_.push_back(u.matrix());
    while ((std::size_t{1} << powers_.size()) < bins_) {
        powers_.push_back(powers_.back() * powers_.back());
    }
}

std::vector<MeasurementBranch> PhaseEstimator::measure(std::span<const cplx> state) const {
    if (state.size() != dimension_) {
        throw ConfigError("phase estimation: state dimension does not match the operator");
    }
    if (!is_normalized(state, 1e-10)) {
        throw PreconditionError("phase estimation: input state is not normalized");
    }

    // joint register: block t holds the system amplitudes for ancilla value t
    const double amp = 1.0 / std::sqrt(static_cast<double>(bins_));
    std::vector<CVector> blocks(bins_);
    for (auto& b : blocks) {
        b.assign(state.begin(), state.end());
        for (auto& x : b) {
            x *= amp;
        }
    }
    for (std::size_t k = 0; k < powers_.size(); ++k) {
        for (std::size_t t = 0; t < bins_; ++t) {
            if ((t >> k) & 1U) {
                blocks[t] = multiply(powers_[k], blocks[t]);
            }
        }
    }

    std::vector<MeasurementBranch> out(bins_);
    double total = 0.0;
    for (std::size_t m = 0; m < bins_; ++m) {
        CVector y(dimension_);
        for (std::size_t t = 0; t < bins_; ++t) {
            const cplx f = fourier_(m, t);
            const CVector& b = blocks[t];
            for (std::size_t i = 0; i < dimension_; ++i) {
                y[i] += f * b[i];
            }
        }
        double p = 0.0;
        for (const auto& x : y) {
            p += std::norm(x);
        }
        total += p;
        out[m].probability = p;
        if (p > 0.0) {
            const double inv = 1.0 / std::sqrt(p);
            for (auto& x : y) {
                x *= inv;
            }
            out[m].state = std::move(y);
        }
    }
    if (std::abs(total - 1.0) > 1e-10) {
        throw NumericalError("phase estimation lost normalization: Σp = " + std::to_string(total));
    }
    return out;
}

std::vector<MeasurementBranch> pe_measure(const UnitaryOperator& u, std::span<const cplx> state, std::size_t bins) {
    return PhaseEstimator(u, bins).measure(state);
}

std::mt19937_64 shot_stream(std::uint64_t seed, std::uint64_t shot_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(shot_index), static_cast<std::uint32_t>(shot_index >> 32)};
    return std::mt19937_64(seq);
}

std::size_t sample_index(std::span<const double> probabilities, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double u = uniform(rng);
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] > 0.0) {
            last_positive = i;
        }
        cum += probabilities[i];
        if (u < cum) {
            return i;
        }
    }
    return last_positive; // rounding: total slightly below 1
}

CircuitSimulator::CircuitSimulator(const MapPair& pair, CircuitConfig cfg)
    : pair_(&pair), cfg_(std::move(cfg)), stage_one_(pair.u, cfg_.m_bins), stage_two_(pair.u_perturbed, cfg_.m_bins) {
    if (cfg_.m_bins < 2) {
        throw ConfigError("circuit: m_bins must be at least 2");
    }
    const std::size_t n = pair.dimension();
    if (const auto* eig = std::get_if<EigenstateIndex>(&cfg_.init)) {
        if (eig->index >= n) {
            throw ConfigError("circuit: eigenstate index out of range");
        }
    } else if (const auto* pure = std::get_if<PureState>(&cfg_.init)) {
        if (pure->amplitudes.size() != n) {
            throw ConfigError("circuit: initial state dimension does not match the model");
        }
        if (!is_normalized(pure->amplitudes, 1e-10)) {
            throw PreconditionError("circuit: initial state is not normalized");
        }
    }
}

std::size_t CircuitSimulator::distinct_initial_states() const {
    return std::holds_alternative<MaximallyMixed>(cfg_.init) ? pair_->dimension() : 1;
}

CVector CircuitSimulator::initial_state(std::size_t basis_index) const {
    if (std::holds_alternative<MaximallyMixed>(cfg_.init)) {
        return basis_vector(pair_->dimension(), basis_index);
    }
    if (const auto* eig = std::get_if<EigenstateIndex>(&cfg_.init)) {
        return pair_->unperturbed.vector(eig->index);
    }
    return std::get<PureState>(cfg_.init).amplitudes;
}

std::size_t CircuitSimulator::draw_basis_index(std::mt19937_64& rng) const {
    if (!std::holds_alternative<MaximallyMixed>(cfg_.init)) {
        return 0;
    }
    std::uniform_int_distribution<std::size_t> pick(0, pair_->dimension() - 1);
    return pick(rng);
}

ShotRecord CircuitSimulator::run_shot(std::uint64_t shot_index) const {
    std::mt19937_64 rng = shot_stream(cfg_.seed, shot_index);
    const CVector psi = initial_state(draw_basis_index(rng));

    const auto first = stage_one_.measure(psi);
    std::vector<double> p1(first.size());
    for (std::size_t m = 0; m < first.size(); ++m) {
        p1[m] = first[m].probability;
    }
    const std::size_t m = sample_index(p1, rng);

    // fresh ancilla, collapsed system register
    const auto second = stage_two_.measure(first[m].state);
    std::vector<double> p2(second.size());
    for (std::size_t l = 0; l < second.size(); ++l) {
        p2[l] = second[l].probability;
    }
    const std::size_t l = sample_index(p2, rng);
    return ShotRecord{m, l, shot_index};
}

CircuitSimulator::BranchTable CircuitSimulator::branch_table(std::span<const cplx> psi) const {
    const std::size_t bins = cfg_.m_bins;
    BranchTable table{std::vector<double>(bins, 0.0), RealMatrix(bins, bins)};
    const auto first = stage_one_.measure(psi);
    for (std::size_t m = 0; m < bins; ++m) {
        table.first[m] = first[m].probability;
        if (first[m].probability <= 0.0) {
            continue;
        }
        const auto second = stage_two_.measure(first[m].state);
        for (std::size_t l = 0; l < bins; ++l) {
            table.second(m, l) = second[l].probability;
        }
    }
    return table;
}

std::vector<ShotRecord> CircuitSimulator::sample() const {
    const std::size_t count = distinct_initial_states();
    std::vector<BranchTable> tables(count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
        tables[i] = branch_table(initial_state(i));
    }

    std::vector<ShotRecord> shots(cfg_.shots);
    const auto total = static_cast<long long>(cfg_.shots);
#pragma omp parallel for schedule(static)
    for (long long s = 0; s < total; ++s) {
        const auto index = static_cast<std::uint64_t>(s);
        std::mt19937_64 rng = shot_stream(cfg_.seed, index);
        const BranchTable& t = tables[draw_basis_index(rng)];
        const std::size_t m = sample_index(t.first, rng);
        const std::size_t l = sample_index(t.second.row(m), rng);
        shots[static_cast<std::size_t>(s)] = ShotRecord{m, l, index};
    }
    return shots;
}

Kernel CircuitSimulator::exact_joint_distribution() const {
    const std::size_t bins = cfg_.m_bins;
    const std::size_t count = distinct_initial_states();
    std::vector<BranchTable> tables(count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < count; ++i) {
        tables[i] = branch_table(initial_state(i));
    }
    // fixed-order reduction keeps the result independent of the thread count
    RealMatrix joint(bins, bins);
    const double weight = 1.0 / static_cast<double>(count);
    for (const auto& t : tables) {
        for (std::size_t m = 0; m < bins; ++m) {
            for (std::size_t l = 0; l < bins; ++l) {
                joint(m, l) += weight * t.first[m] * t.second(m, l);
            }
        }
    }
    return make_kernel(std::move(joint));
}

ShotRecord run_shot(const MapPair& pair, const CircuitConfig& cfg, std::uint64_t shot_index) {
    return CircuitSimulator(pair, cfg).run_shot(shot_index);
}

Kernel exact_joint_distribution(const MapPair& pair, const CircuitConfig& cfg) {
    return CircuitSimulator(pair, cfg).exact_joint_distribution();
}

} // namespace ldos
