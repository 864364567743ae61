#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ldos/errors.hpp"
#include "ldos/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ldos;

namespace {

// Independent route for σ: enumerate all pairs from an explicitly formed
// ⟨φ_j|V|φ_k⟩ via inner products, no matrix products.
double sigma_brute_force(const SpectralData& s, const HermitianOperator& v, double delta, double threshold) {
    const std::size_t n = s.dimension();
    std::vector<double> m2(n * n);
    double peak = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const CVector vj = s.vector(j);
        for (std::size_t k = 0; k < n; ++k) {
            const CVector vk = s.vector(k);
            const CVector vvk = multiply(v.matrix(), vk);
            m2[j * n + k] = std::norm(inner(vj, vvk));
            if (j != k) {
                peak = std::max(peak, m2[j * n + k]);
            }
        }
    }
    long double sum = 0.0;
    long count = 0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (j != k && m2[j * n + k] >= threshold * peak) {
                sum += m2[j * n + k];
                ++count;
            }
        }
    }
    return delta * std::sqrt(static_cast<double>(sum / count));
}

} // namespace

TEST_CASE("build_floquet") {
    const UnitaryOperator zero = build_floquet(HermitianOperator(CMatrix(4, 4)), 0.9);
    CHECK(max_abs_diff(zero.matrix(), CMatrix::identity(4)) < 1e-15);

    const CVector d{1.0, 2.0};
    const UnitaryOperator u = build_floquet(HermitianOperator(CMatrix::diagonal(d)), std::numbers::pi);
    CHECK(std::abs(u.matrix()(0, 0) - std::polar(1.0, -std::numbers::pi)) < 1e-14);
    CHECK(std::abs(u.matrix()(1, 1) - std::polar(1.0, -2.0 * std::numbers::pi)) < 1e-14);

    const HermitianOperator h = build_gue_perturbation(16, 4);
    const UnitaryOperator fwd = build_floquet(h, 0.7);
    const UnitaryOperator back = build_floquet(h, -0.7);
    CHECK(max_abs_diff((fwd * back).matrix(), CMatrix::identity(16)) <= 1e-10);
}

TEST_CASE("build_haar_random is seed deterministic and unitary") {
    CHECK(build_haar_random(2, 1).matrix() == build_haar_random(2, 1).matrix());
    CHECK(!(build_haar_random(8, 1).matrix() == build_haar_random(8, 2).matrix()));
    CHECK(unitarity_defect(build_haar_random(64, 7).matrix()) <= 1e-10);
}

TEST_CASE("Haar eigenphase mean nearest-neighbour spacing is 2π/N") {
    const std::size_t n = 64;
    double total = 0.0;
    std::size_t count = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SpectralData s = eig_unitary(build_haar_random(n, 1000 + seed));
        for (std::size_t j = 0; j < n; ++j) {
            const double next = j + 1 < n ? s.phases[j + 1] : s.phases[0] + kTwoPi;
            total += next - s.phases[j];
            ++count;
        }
    }
    // the circular gaps sum to 2π exactly; check the per-matrix statistic too
    CHECK(total / static_cast<double>(count) == doctest::Approx(kTwoPi / n).epsilon(0.05));

    // Haar (CUE) level repulsion: small gaps are rare compared with Poisson
    const SpectralData s = eig_unitary(build_haar_random(n, 77));
    std::size_t tiny = 0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        if (s.phases[j + 1] - s.phases[j] < 0.1 * kTwoPi / n) {
            ++tiny;
        }
    }
    CHECK(tiny <= 2);
}

TEST_CASE("build_gue_perturbation statistics") {
    const HermitianOperator v = build_gue_perturbation(32, 3);
    CHECK(hermiticity_defect(v.matrix()) == 0.0);
    double off = 0.0;
    double trace = 0.0;
    for (std::size_t j = 0; j < 32; ++j) {
        trace += v.matrix()(j, j).real();
        for (std::size_t k = 0; k < 32; ++k) {
            if (j != k) {
                off += std::norm(v.matrix()(j, k));
            }
        }
    }
    CHECK(off / (32.0 * 31.0) == doctest::Approx(1.0).epsilon(0.15));
    // diagonal entries are N(0, s²) with s ≈ 1 after rescaling: trace/N has sd ≈ 1/√N
    CHECK(std::abs(trace / 32.0) <= 3.0 / std::sqrt(32.0) * 1.2);

    const HermitianOperator banded = build_gue_perturbation(20, 5, 3);
    for (std::size_t j = 0; j < 20; ++j) {
        for (std::size_t k = 0; k < 20; ++k) {
            if ((j > k ? j - k : k - j) > 3) {
                CHECK(v.matrix()(j, k) != cplx{});
                CHECK(banded.matrix()(j, k) == cplx{});
            }
        }
    }
}

TEST_CASE("build_perturbed") {
    const UnitaryOperator u = build_haar_random(6, 8);
    const HermitianOperator v = build_gue_perturbation(6, 9);
    CHECK(build_perturbed(u, v, 0.0).matrix() == u.matrix());

    const CVector d{1.0, 2.0};
    const UnitaryOperator p = build_perturbed(UnitaryOperator::identity(2), HermitianOperator(CMatrix::diagonal(d)), 0.5);
    CHECK(std::abs(p.matrix()(0, 0) - std::polar(1.0, -0.5)) < 1e-14);
    CHECK(std::abs(p.matrix()(1, 1) - std::polar(1.0, -1.0)) < 1e-14);

    const UnitaryOperator q = build_perturbed(build_haar_random(16, 1), build_gue_perturbation(16, 2), 0.3);
    CHECK(unitarity_defect(q.matrix()) <= 1e-10);
    CHECK_THROWS_AS(build_perturbed(u, v, -0.1), ConfigError);
}

TEST_CASE("effective_strength") {
    const UnitaryOperator u = build_haar_random(12, 21);
    const HermitianOperator v = build_gue_perturbation(12, 22);
    const SpectralData s = eig_unitary(u);
    CHECK(effective_strength(s, v, 0.0) == 0.0);

    // constant couplings c in the eigenbasis of a diagonal U
    const std::size_t n = 5;
    const cplx c{0.3, -0.4};
    CMatrix m(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (j < k) {
                m(j, k) = c;
            } else if (j > k) {
                m(j, k) = std::conj(c);
            }
        }
    }
    CVector phases(n);
    for (std::size_t j = 0; j < n; ++j) {
        phases[j] = std::polar(1.0, -0.2 - 1.1 * static_cast<double>(j));
    }
    const SpectralData sd = eig_unitary(UnitaryOperator(CMatrix::diagonal(phases)));
    CHECK(effective_strength(sd, HermitianOperator(m), 0.7) == doctest::Approx(0.7 * std::abs(c)).epsilon(1e-12));

    // full Haar + GUE instance against the brute-force pair enumeration
    const UnitaryOperator u64 = build_haar_random(64, 31);
    const HermitianOperator v64 = build_gue_perturbation(64, 32);
    const SpectralData s64 = eig_unitary(u64);
    const double sigma = effective_strength(s64, v64, 0.05);
    CHECK(sigma == doctest::Approx(sigma_brute_force(s64, v64, 0.05, 0.01)).epsilon(1e-10));

    // homogeneity in δ
    CHECK(effective_strength(s64, v64, 0.15) == doctest::Approx(3.0 * sigma).epsilon(1e-14));

    const CVector diag{1.0, 2.0, 3.0};
    const SpectralData s3 = eig_unitary(UnitaryOperator::identity(3));
    CHECK_THROWS_AS(effective_strength(s3, HermitianOperator(CMatrix::diagonal(diag)), 0.1), DegenerateInputError);
}

TEST_CASE("bandwidth") {
    // diagonal U with ascending phases: the computational basis is the ordered eigenbasis
    const std::size_t n = 40;
    CVector phases(n);
    for (std::size_t j = 0; j < n; ++j) {
        phases[j] = std::polar(1.0, -(0.01 + kTwoPi * static_cast<double>(j) / n));
    }
    const SpectralData s = eig_unitary(UnitaryOperator(CMatrix::diagonal(phases)));

    CMatrix tri(n, n);
    for (std::size_t j = 0; j + 1 < n; ++j) {
        tri(j, j + 1) = cplx{0.5, 0.1};
        tri(j + 1, j) = cplx{0.5, -0.1};
    }
    for (double f : {0.1, 0.5, 0.95, 1.0}) {
        CHECK(bandwidth(s, HermitianOperator(tri), f) == 1);
    }

    const HermitianOperator banded = build_gue_perturbation(n, 13, 5);
    CHECK(bandwidth(s, banded, 1.0) == 5);

    // monotone in the mass fraction
    std::size_t prev = 0;
    for (double f = 0.05; f < 1.0; f += 0.05) {
        const std::size_t b = bandwidth(s, banded, f);
        CHECK(b >= prev);
        prev = b;
    }

    const UnitaryOperator u = build_haar_random(64, 3);
    const std::size_t b = bandwidth(eig_unitary(u), build_gue_perturbation(64, 4), 0.95);
    CHECK(std::abs(static_cast<double>(b) - 0.95 * 32.0) <= 2.0);
}

TEST_CASE("level_density") {
    CHECK(level_density(64) == doctest::Approx(10.186).epsilon(1e-4));
    CHECK(level_density(128) == 2.0 * level_density(64));
    CHECK_THROWS_AS(level_density(1), ConfigError);
}

TEST_CASE("map pair invariants and seeded generators") {
    for (auto kind : {ModelKind::haar_random, ModelKind::gue_kick, ModelKind::diagonal_grid,
                      ModelKind::floquet_hamiltonian}) {
        const ModelSpec spec{kind, 16, 5, 0.8, 0, 0};
        const UnitaryOperator a = build_unitary(spec, 8);
        const UnitaryOperator b = build_unitary(spec, 8);
        CHECK(a.matrix() == b.matrix());
    }
    const ModelSpec pert{ModelKind::gue_kick, 16, 6};
    CHECK(build_perturbation(pert, 8).matrix() == build_perturbation(pert, 8).matrix());
    CHECK_THROWS_AS(build_perturbation(ModelSpec{ModelKind::haar_random, 16, 1}, 8), ConfigError);

    const MapPair pair = build_map_pair(build_haar_random(16, 1), build_gue_perturbation(16, 2), 0.2);
    const UnitaryOperator expected = exp_minus_i(pair.v.matrix(), 0.2) * pair.u;
    CHECK(max_abs_diff(pair.u_perturbed.matrix(), expected.matrix()) <= 1e-9);
    CHECK(pair.bandwidth >= 1);
    CHECK(pair.bandwidth <= 15);

    const MapPair still = build_map_pair(build_haar_random(16, 1), build_gue_perturbation(16, 2), 0.0);
    CHECK(still.sigma == 0.0);
    CHECK(still.u_perturbed.matrix() == still.u.matrix());
}
