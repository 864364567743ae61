#pragma once

#include "ldos/linalg.hpp"
#include "ldos/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ldos {

enum class ModelKind { haar_random, gue_kick, diagonal_grid, floquet_hamiltonian };

std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

// Generator description. Only the parameters relevant to `kind` are read:
//   tau              floquet_hamiltonian, gue_kick (kick strength)
//   grid_bins        diagonal_grid (0 = use the circuit's bin count)
//   band_half_width  gue_kick used as a perturbation (0 = full matrix)
struct ModelSpec {
    ModelKind kind = ModelKind::haar_random;
    std::size_t dimension = 0;
    std::uint64_t seed = 0;
    double tau = 1.0;
    std::size_t grid_bins = 0;
    std::size_t band_half_width = 0;
};

UnitaryOperator build_floquet(const HermitianOperator& h, double tau);
UnitaryOperator build_haar_random(std::size_t n, std::uint64_t seed);

// GUE matrix rescaled so the mean |V_jk|² over (in-band) off-diagonal entries is 1.
// band_half_width > 0 keeps only |j − k| ≤ band_half_width.
HermitianOperator build_gue_perturbation(std::size_t n, std::uint64_t seed, std::size_t band_half_width = 0);

// diag(exp(−2πi m_j / bins)) with m_j uniform on [0, bins).
UnitaryOperator build_diagonal_grid(std::size_t n, std::size_t bins, std::uint64_t seed);

// exp(−iδV)·U
UnitaryOperator build_perturbed(const UnitaryOperator& u, const HermitianOperator& v, double delta);

// W† V W for the eigenvector matrix W of `s`.
CMatrix in_eigenbasis(const SpectralData& s, const HermitianOperator& v);

// σ = δ·sqrt(mean |V_jj'|²) over directly coupled pairs j ≠ j', i.e. those with
// |V_jj'|² ≥ coupling_threshold · max_{p≠q} |V_pq|² in the eigenbasis of U.
double effective_strength(const SpectralData& u_spectral, const HermitianOperator& v, double delta,
                          double coupling_threshold = 0.01);

// Smallest circular index distance w whose band carries `mass_fraction` of the
// off-diagonal weight of V in the phase-ordered eigenbasis of U.
std::size_t bandwidth(const SpectralData& u_spectral, const HermitianOperator& v, double mass_fraction = 0.95);

// Uniform eigenphase density on the unit circle, N/2π.
double level_density(std::size_t n);

UnitaryOperator build_unitary(const ModelSpec& spec, std::size_t default_bins);
HermitianOperator build_perturbation(const ModelSpec& spec, std::size_t default_bins);

struct PairOptions {
    double coupling_threshold = 0.01;
    double mass_fraction = 0.95;
};

// The experiment's physical configuration: U, V, δ, U(σ) and derived parameters.
struct MapPair {
    UnitaryOperator u;
    HermitianOperator v;
    double delta;
    UnitaryOperator u_perturbed;
    SpectralData unperturbed;
    SpectralData perturbed;
    double sigma;
    std::size_t bandwidth;
    double level_density;

    std::size_t dimension() const { return u.dimension(); }
};

MapPair build_map_pair(UnitaryOperator u, HermitianOperator v, double delta, const PairOptions& options = {});

} // namespace ldos
