#include "ldos/models.hpp"

#include "ldos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ldos {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::haar_random:
        return "haar_random";
    case ModelKind::gue_kick:
        return "gue_kick";
    case ModelKind::diagonal_grid:
        return "diagonal_grid";
    case ModelKind::floquet_hamiltonian:
        return "floquet_hamiltonian";
    }
    return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (auto kind : {ModelKind::haar_random, ModelKind::gue_kick, ModelKind::diagonal_grid,
                      ModelKind::floquet_hamiltonian}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

namespace {

void require_dimension(std::size_t n, const char* who) {
    if (n < 2) {
        throw ConfigError(std::string(who) + ": dimension must be at least 2");
    }
}

// Unnormalized GUE draw: N(0,1) diagonal, (a + ib)/√2 off-diagonal.
CMatrix gue_sample(std::size_t n, std::mt19937_64& rng, std::size_t band_half_width) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    CMatrix h(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        h(i, i) = normal(rng);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double re = normal(rng);
            const double im = normal(rng);
            if (band_half_width != 0 && j - i > band_half_width) {
                continue;
            }
            h(i, j) = cplx{re * s, im * s};
            h(j, i) = std::conj(h(i, j));
        }
    }
    return h;
}

} // namespace

UnitaryOperator build_floquet(const HermitianOperator& h, double tau) {
    return exp_minus_i(h.matrix(), tau);
}

UnitaryOperator build_haar_random(std::size_t n, std::uint64_t seed) {
    require_dimension(n, "build_haar_random");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    CMatrix z(n, n);
    for (auto& x : z.data()) {
        const double re = normal(rng);
        const double im = normal(rng);
        x = cplx{re * s, im * s};
    }

    // Gram-Schmidt QR (two passes) yields R with a positive real diagonal,
    // which is the phase fix that makes Q Haar distributed.
    CMatrix q(n, n);
    CVector col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = z(i, j);
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                cplx proj{};
                for (std::size_t i = 0; i < n; ++i) {
                    proj += std::conj(q(i, k)) * col[i];
                }
                for (std::size_t i = 0; i < n; ++i) {
                    col[i] -= proj * q(i, k);
                }
            }
        }
        const double nrm = norm2(col);
        for (std::size_t i = 0; i < n; ++i) {
            q(i, j) = col[i] / nrm;
        }
    }
    return UnitaryOperator(std::move(q));
}

HermitianOperator build_gue_perturbation(std::size_t n, std::uint64_t seed, std::size_t band_half_width) {
    require_dimension(n, "build_gue_perturbation");
    std::mt19937_64 rng(seed);
    CMatrix h = gue_sample(n, rng, band_half_width);

    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || (band_half_width != 0 && (i > j ? i - j : j - i) > band_half_width)) {
                continue;
            }
            sum += std::norm(h(i, j));
            ++count;
        }
    }
    const double scale = 1.0 / std::sqrt(sum / static_cast<double>(count));
    for (auto& x : h.data()) {
        x *= scale;
    }
    return HermitianOperator(std::move(h));
}

UnitaryOperator build_diagonal_grid(std::size_t n, std::size_t bins, std::uint64_t seed) {
    require_dimension(n, "build_diagonal_grid");
    if (bins < 1) {
        throw ConfigError("build_diagonal_grid: bin count must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, bins - 1);
    CVector diag(n);
    for (auto& d : diag) {
        const std::size_t m = pick(rng);
        d = std::polar(1.0, -kTwoPi * static_cast<double>(m) / static_cast<double>(bins));
    }
    return UnitaryOperator(CMatrix::diagonal(diag));
}

UnitaryOperator build_perturbed(const UnitaryOperator& u, const HermitianOperator& v, double delta) {
    if (u.dimension() != v.dimension()) {
        throw ConfigError("build_perturbed: U and V dimensions differ");
    }
    if (delta < 0.0) {
        throw ConfigError("build_perturbed: delta must be non-negative");
    }
    if (delta == 0.0) {
        return u;
    }
    return exp_minus_i(v.matrix(), delta) * u;
}

CMatrix in_eigenbasis(const SpectralData& s, const HermitianOperator& v) {
    if (s.dimension() != v.dimension()) {
        throw ConfigError("in_eigenbasis: dimension mismatch");
    }
    return s.vectors.adjoint() * (v.matrix() * s.vectors);
}

double effective_strength(const SpectralData& u_spectral, const HermitianOperator& v, double delta,
                          double coupling_threshold) {
    if (!(coupling_threshold > 0.0 && coupling_threshold < 1.0)) {
        throw ParameterError("effective_strength: coupling_threshold must lie in (0, 1)");
    }
    if (delta == 0.0) {
        return 0.0;
    }
    const CMatrix w = in_eigenbasis(u_spectral, v);
    const std::size_t n = w.rows();
    double peak = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (j != k) {
                peak = std::max(peak, std::norm(w(j, k)));
            }
        }
    }
    if (peak == 0.0) {
        throw DegenerateInputError("effective_strength: perturbation has no off-diagonal coupling");
    }
    const double cut = coupling_threshold * peak;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const double m2 = std::norm(w(j, k));
            if (j != k && m2 >= cut) {
                sum += m2;
                ++count;
            }
        }
    }
    return delta * std::sqrt(sum / static_cast<double>(count));
}

std::size_t bandwidth(const SpectralData& u_spectral, const HermitianOperator& v, double mass_fraction) {
    if (!(mass_fraction > 0.0 && mass_fraction <= 1.0)) {
        throw ParameterError("bandwidth: mass_fraction must lie in (0, 1]");
    }
    const CMatrix w = in_eigenbasis(u_spectral, v);
    const std::size_t n = w.rows();
    std::vector<double> mass(n / 2 + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (j == k) {
                continue;
            }
            const std::size_t d = j > k ? j - k : k - j;
            mass[std::min(d, n - d)] += std::norm(w(j, k));
        }
    }
    double total = 0.0;
    for (double m : mass) {
        total += m;
    }
    if (total == 0.0) {
        return 1;
    }
    const double target = mass_fraction * total;
    double cum = 0.0;
    for (std::size_t d = 1; d < mass.size(); ++d) {
        cum += mass[d];
        if (cum >= target) {
            return d;
        }
    }
    return mass.size() - 1;
}

double level_density(std::size_t n) {
    if (n < 2) {
        throw ConfigError("level_density: dimension must be at least 2");
    }
    return static_cast<double>(n) / kTwoPi;
}

UnitaryOperator build_unitary(const ModelSpec& spec, std::size_t default_bins) {
    const std::size_t n = spec.dimension;
    require_dimension(n, "model");
    switch (spec.kind) {
    case ModelKind::haar_random:
        return build_haar_random(n, spec.seed);
    case ModelKind::diagonal_grid:
        return build_diagonal_grid(n, spec.grid_bins != 0 ? spec.grid_bins : default_bins, spec.seed);
    case ModelKind::floquet_hamiltonian:
        return build_floquet(build_gue_perturbation(n, spec.seed), spec.tau);
    case ModelKind::gue_kick: {
        // free rotation by random phases followed by a GUE kick of strength τ
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> angle(0.0, kTwoPi);
        CVector diag(n);
        for (auto& d : diag) {
            d = std::polar(1.0, -angle(rng));
        }
        const UnitaryOperator rotation(CMatrix::diagonal(diag));
        return build_floquet(build_gue_perturbation(n, spec.seed ^ 0x9e3779b97f4a7c15ULL), spec.tau) * rotation;
    }
    }
    throw ConfigError("unknown model kind");
}

HermitianOperator build_perturbation(const ModelSpec& spec, std::size_t default_bins) {
    const std::size_t n = spec.dimension;
    require_dimension(n, "perturbation");
    switch (spec.kind) {
    case ModelKind::gue_kick:
        return build_gue_perturbation(n, spec.seed, spec.band_half_width);
    case ModelKind::diagonal_grid: {
        // diagonal V with entries on the 2π/bins grid
        const std::size_t bins = spec.grid_bins != 0 ? spec.grid_bins : default_bins;
        std::mt19937_64 rng(spec.seed);
        std::uniform_int_distribution<std::size_t> pick(0, bins - 1);
        CVector diag(n);
        for (auto& d : diag) {
            d = kTwoPi * static_cast<double>(pick(rng)) / static_cast<double>(bins);
        }
        return HermitianOperator(CMatrix::diagonal(diag));
    }
    case ModelKind::haar_random:
    case ModelKind::floquet_hamiltonian:
        throw ConfigError(std::string("perturbation kind '") + std::string(to_string(spec.kind)) +
                          "' is not a Hermitian generator; use gue_kick or diagonal_grid");
    }
    throw ConfigError("unknown perturbation kind");
}

MapPair build_map_pair(UnitaryOperator u, HermitianOperator v, double delta, const PairOptions& options) {
    if (u.dimension() != v.dimension()) {
        throw ConfigError("map pair: U and V dimensions differ");
    }
    if (delta < 0.0) {
        throw ConfigError("delta must be non-negative");
    }
    UnitaryOperator up = build_perturbed(u, v, delta);
    SpectralData su = eig_unitary(u);
    SpectralData sp = delta == 0.0 ? su : eig_unitary(up);
    const double sigma = effective_strength(su, v, delta, options.coupling_threshold);
    const std::size_t b = std::clamp<std::size_t>(bandwidth(su, v, options.mass_fraction), 1, u.dimension() - 1);
    const double rho = level_density(u.dimension());
    return MapPair{std::move(u), std::move(v), delta, std::move(up), std::move(su), std::move(sp), sigma, b, rho};
}

} // namespace ldos
