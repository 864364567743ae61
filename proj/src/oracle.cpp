#include "ldos/oracle.hpp"

#include "ldos/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace ldos {

TransitionMatrix transition_matrix(const SpectralData& unperturbed, const SpectralData& perturbed) {
    const std::size_t n = unperturbed.dimension();
    if (perturbed.dimension() != n) {
        throw ConfigError("transition_matrix: dimension mismatch");
    }
    const CMatrix overlap = perturbed.vectors.adjoint() * unperturbed.vectors;
    RealMatrix p(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            p(k, j) = std::norm(overlap(k, j));
        }
    }
    return TransitionMatrix{std::move(p)};
}

RealMatrix coarse_grain(const TransitionMatrix& t, const std::vector<double>& perturbed_phases, std::size_t bins) {
    const std::size_t n = t.p.rows();
    if (perturbed_phases.size() != n || bins == 0) {
        throw ConfigError("coarse_grain: inconsistent inputs");
    }
    RealMatrix out(bins, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t l = band_index(perturbed_phases[k], bins);
        for (std::size_t j = 0; j < n; ++j) {
            out(l, j) += t.p(k, j);
        }
    }
    return out;
}

BandAverage band_average(const RealMatrix& coarse, const std::vector<double>& unperturbed_phases, std::size_t bins) {
    const std::size_t n = coarse.cols();
    if (coarse.rows() != bins || unperturbed_phases.size() != n) {
        throw ConfigError("band_average: inconsistent inputs");
    }
    BandAverage out{RealMatrix(bins, bins), std::vector<std::size_t>(bins, 0)};
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t m = band_index(unperturbed_phases[j], bins);
        ++out.counts[m];
        for (std::size_t l = 0; l < bins; ++l) {
            out.kernel(m, l) += coarse(l, j);
        }
    }
    for (std::size_t m = 0; m < bins; ++m) {
        if (out.counts[m] == 0) {
            continue;
        }
        const double inv = 1.0 / static_cast<double>(out.counts[m]);
        for (std::size_t l = 0; l < bins; ++l) {
            out.kernel(m, l) *= inv;
        }
    }
    return out;
}

namespace {

void require_bins(std::size_t bins) {
    if (bins == 0) {
        throw ConfigError("bin count must be positive");
    }
}

// c_j = ⟨φ_j|ψ⟩ for the requested pure initial state.
CVector eigen_coefficients(const SpectralData& s, const CVector& psi) {
    if (psi.size() != s.dimension()) {
        throw ConfigError("initial state dimension does not match the model");
    }
    if (!is_normalized(psi, 1e-10)) {
        throw PreconditionError("initial state is not normalized");
    }
    return multiply(s.vectors.adjoint(), psi);
}

} // namespace

Kernel kernel_ideal_binning(const MapPair& pair, std::size_t bins, const InitMode& init) {
    require_bins(bins);
    const std::size_t n = pair.dimension();
    const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
    const RealMatrix coarse = coarse_grain(t, pair.perturbed.phases, bins);

    if (const auto* eig = std::get_if<EigenstateIndex>(&init)) {
        if (eig->index >= n) {
            throw ConfigError("eigenstate index out of range");
        }
        const std::size_t m = band_index(pair.unperturbed.phases[eig->index], bins);
        RealMatrix cond(bins, bins);
        std::vector<double> marginal(bins, 0.0);
        marginal[m] = 1.0;
        for (std::size_t l = 0; l < bins; ++l) {
            cond(m, l) = coarse(l, eig->index);
        }
        return make_kernel(cond, marginal);
    }

    if (std::holds_alternative<MaximallyMixed>(init)) {
        const BandAverage avg = band_average(coarse, pair.unperturbed.phases, bins);
        std::vector<double> marginal(bins);
        for (std::size_t m = 0; m < bins; ++m) {
            marginal[m] = static_cast<double>(avg.counts[m]) / static_cast<double>(n);
        }
        return make_kernel(avg.kernel, marginal);
    }

    // general pure state: coherent sum over the collapsed band with rescaled c̃_j
    const CVector c = eigen_coefficients(pair.unperturbed, std::get<PureState>(init).amplitudes);
    const CMatrix overlap = pair.perturbed.vectors.adjoint() * pair.unperturbed.vectors; // ⟨φ_k(σ)|φ_j⟩
    std::vector<std::size_t> unpert_band(n), pert_band(n);
    for (std::size_t j = 0; j < n; ++j) {
        unpert_band[j] = band_index(pair.unperturbed.phases[j], bins);
        pert_band[j] = band_index(pair.perturbed.phases[j], bins);
    }
    RealMatrix cond(bins, bins);
    std::vector<double> marginal(bins, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        marginal[unpert_band[j]] += std::norm(c[j]);
    }
    for (std::size_t m = 0; m < bins; ++m) {
        if (marginal[m] <= Kernel::kEmptyMarginal) {
            continue;
        }
        const double scale = 1.0 / std::sqrt(marginal[m]);
        for (std::size_t k = 0; k < n; ++k) {
            cplx amp{};
            for (std::size_t j = 0; j < n; ++j) {
                if (unpert_band[j] == m) {
                    amp += overlap(k, j) * c[j] * scale;
                }
            }
            cond(m, pert_band[k]) += std::norm(amp);
        }
    }
    return make_kernel(cond, marginal);
}

cplx leakage_amplitude(double phase, std::size_t m, std::size_t bins) {
    const double mm = static_cast<double>(bins);
    // reduce θ into [−π, π); the Dirichlet form below is invariant under θ → θ + 2π
    const double theta = wrap_angle(phase - kTwoPi * static_cast<double>(m) / mm);
    const double half = std::sin(0.5 * theta);
    if (half == 0.0) {
        return 1.0;
    }
    const double ratio = std::sin(0.5 * mm * theta) / (mm * half);
    return std::polar(ratio, -0.5 * theta * (mm - 1.0));
}

Kernel kernel_circuit_faithful(const MapPair& pair, std::size_t bins, const InitMode& init) {
    require_bins(bins);
    const std::size_t n = pair.dimension();

    // leakage tables a(φ_j, m) and |a(φ_k(σ), l)|²
    CMatrix first(n, bins);
    RealMatrix second(n, bins);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < bins; ++m) {
            first(j, m) = leakage_amplitude(pair.unperturbed.phases[j], m, bins);
            second(j, m) = std::norm(leakage_amplitude(pair.perturbed.phases[j], m, bins));
        }
    }

    RealMatrix joint(bins, bins);
    if (std::holds_alternative<MaximallyMixed>(init)) {
        // the mixture is diagonal in any basis, so average over eigenstates of U
        const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> second_given_j(bins, 0.0);
            for (std::size_t k = 0; k < n; ++k) {
                const double pkj = t.p(k, j);
                for (std::size_t l = 0; l < bins; ++l) {
                    second_given_j[l] += second(k, l) * pkj;
                }
            }
            for (std::size_t m = 0; m < bins; ++m) {
                const double w = std::norm(first(j, m)) * inv_n;
                for (std::size_t l = 0; l < bins; ++l) {
                    joint(m, l) += w * second_given_j[l];
                }
            }
        }
        return make_kernel(std::move(joint));
    }

    CVector c;
    if (const auto* eig = std::get_if<EigenstateIndex>(&init)) {
        if (eig->index >= n) {
            throw ConfigError("eigenstate index out of range");
        }
        c = basis_vector(n, eig->index);
    } else {
        c = eigen_coefficients(pair.unperturbed, std::get<PureState>(init).amplitudes);
    }
    const CMatrix overlap = pair.perturbed.vectors.adjoint() * pair.unperturbed.vectors;
    CVector alpha(n);
    for (std::size_t m = 0; m < bins; ++m) {
        for (std::size_t j = 0; j < n; ++j) {
            alpha[j] = c[j] * first(j, m);
        }
        const CVector beta = multiply(overlap, alpha);
        for (std::size_t k = 0; k < n; ++k) {
            const double b2 = std::norm(beta[k]);
            for (std::size_t l = 0; l < bins; ++l) {
                joint(m, l) += second(k, l) * b2;
            }
        }
    }
    return make_kernel(std::move(joint));
}

} // namespace ldos
