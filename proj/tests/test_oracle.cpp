#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ldos/circuit.hpp"
#include "ldos/errors.hpp"
#include "ldos/oracle.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace ldos;
using namespace ldos::testing;

namespace {

// Direct geometric sum, the reference for leakage_amplitude.
cplx leakage_direct(double phase, std::size_t m, std::size_t bins) {
    cplx acc{};
    for (std::size_t t = 0; t < bins; ++t) {
        acc += std::polar(1.0, -(phase - kTwoPi * static_cast<double>(m) / bins) * static_cast<double>(t));
    }
    return acc / static_cast<double>(bins);
}

// Band membership by explicit arc test, independent of band_index.
bool in_band(double phase, std::size_t l, std::size_t bins) {
    const double width = kTwoPi / bins;
    const double lo = kTwoPi * l / bins - 0.5 * width;
    double rel = std::fmod(phase - lo, kTwoPi);
    if (rel < 0) {
        rel += kTwoPi;
    }
    return rel < width;
}

double row_sum(const RealMatrix& a, std::size_t r) {
    double s = 0.0;
    for (double x : a.row(r)) {
        s += x;
    }
    return s;
}

} // namespace

TEST_CASE("transition_matrix") {
    const MapPair still = haar_gue_pair(8, 1, 0.0);
    const TransitionMatrix id = transition_matrix(still.unperturbed, still.perturbed);
    for (std::size_t k = 0; k < 8; ++k) {
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(std::abs(id.p(k, j) - (k == j ? 1.0 : 0.0)) < 1e-12);
        }
    }

    // permuted basis → permutation matrix
    SpectralData perm = still.unperturbed;
    const std::vector<std::size_t> sigma{3, 0, 7, 1, 6, 2, 5, 4};
    for (std::size_t k = 0; k < 8; ++k) {
        for (std::size_t i = 0; i < 8; ++i) {
            perm.vectors(i, k) = still.unperturbed.vectors(i, sigma[k]);
        }
    }
    const TransitionMatrix pm = transition_matrix(still.unperturbed, perm);
    for (std::size_t k = 0; k < 8; ++k) {
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(std::abs(pm.p(k, j) - (sigma[k] == j ? 1.0 : 0.0)) < 1e-12);
        }
    }

    const MapPair pair = haar_gue_pair(16, 2, 0.4);
    const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
    for (std::size_t i = 0; i < 16; ++i) {
        double rs = 0.0;
        double cs = 0.0;
        for (std::size_t j = 0; j < 16; ++j) {
            rs += t.p(i, j);
            cs += t.p(j, i);
            CHECK(t.p(i, j) >= 0.0);
            CHECK(t.p(i, j) <= 1.0 + 1e-12);
        }
        CHECK(std::abs(rs - 1.0) <= 1e-9);
        CHECK(std::abs(cs - 1.0) <= 1e-9);
    }
}

TEST_CASE("band_index partitions the circle with edges going to the higher band") {
    CHECK(band_index(0.0, 8) == 0);
    CHECK(band_index(kTwoPi - 1e-9, 8) == 0);
    CHECK(band_index(kTwoPi / 16.0, 8) == 1);
    CHECK(band_index(kTwoPi / 16.0 - 1e-9, 8) == 0);
    CHECK(band_index(3.0 * kTwoPi / 8.0, 8) == 3);
}

TEST_CASE("coarse_grain") {
    const MapPair pair = haar_gue_pair(32, 3, 0.3);
    const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);

    const RealMatrix one = coarse_grain(t, pair.perturbed.phases, 1);
    for (std::size_t j = 0; j < 32; ++j) {
        CHECK(one(0, j) == doctest::Approx(1.0).epsilon(1e-12));
    }

    const std::size_t bins = 8;
    const RealMatrix cg = coarse_grain(t, pair.perturbed.phases, bins);
    for (std::size_t j = 0; j < 32; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < bins; ++l) {
            double brute = 0.0;
            for (std::size_t k = 0; k < 32; ++k) {
                if (in_band(pair.perturbed.phases[k], l, bins)) {
                    brute += t.p(k, j);
                }
            }
            CHECK(cg(l, j) == brute);
            s += cg(l, j);
        }
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }

    const MapPair aligned = grid_aligned_pair(12, 4, 5, 1.0);
    const MapPair still = build_map_pair(aligned.u, aligned.v, 0.0);
    const RealMatrix ind = coarse_grain(transition_matrix(still.unperturbed, still.perturbed), still.perturbed.phases, 4);
    for (std::size_t j = 0; j < 12; ++j) {
        const std::size_t own = band_index(still.unperturbed.phases[j], 4);
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(std::abs(ind(l, j) - (l == own ? 1.0 : 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("band_average") {
    const MapPair pair = haar_gue_pair(24, 4, 0.2);
    const std::size_t bins = 8;
    const RealMatrix cg = coarse_grain(transition_matrix(pair.unperturbed, pair.perturbed), pair.perturbed.phases, bins);
    const BandAverage avg = band_average(cg, pair.unperturbed.phases, bins);
    std::size_t total = 0;
    for (std::size_t m = 0; m < bins; ++m) {
        total += avg.counts[m];
        if (!avg.empty(m)) {
            CHECK(std::abs(row_sum(avg.kernel, m) - 1.0) <= 1e-9);
        }
    }
    CHECK(total == 24);

    // uniform transitions: P(Δ_l|Δ_m) = N_l / N
    TransitionMatrix uniform{RealMatrix(24, 24, 1.0 / 24.0)};
    const RealMatrix ucg = coarse_grain(uniform, pair.perturbed.phases, bins);
    const BandAverage uavg = band_average(ucg, pair.unperturbed.phases, bins);
    std::vector<std::size_t> occupancy(bins, 0);
    for (double phi : pair.perturbed.phases) {
        ++occupancy[band_index(phi, bins)];
    }
    for (std::size_t m = 0; m < bins; ++m) {
        if (uavg.empty(m)) {
            continue;
        }
        for (std::size_t l = 0; l < bins; ++l) {
            CHECK(uavg.kernel(m, l) == doctest::Approx(occupancy[l] / 24.0).epsilon(1e-12));
        }
    }

    // δ = 0 on a grid-aligned model is the identity on non-empty bands
    const MapPair still = build_map_pair(grid_aligned_unitary(10, 4, 3), build_gue_perturbation(10, 4), 0.0);
    const RealMatrix scg = coarse_grain(transition_matrix(still.unperturbed, still.perturbed), still.perturbed.phases, 4);
    const BandAverage savg = band_average(scg, still.unperturbed.phases, 4);
    for (std::size_t m = 0; m < 4; ++m) {
        if (savg.empty(m)) {
            CHECK(row_sum(savg.kernel, m) == 0.0);
            continue;
        }
        for (std::size_t l = 0; l < 4; ++l) {
            CHECK(std::abs(savg.kernel(m, l) - (l == m ? 1.0 : 0.0)) < 1e-12);
        }
    }
}

TEST_CASE("kernel_ideal_binning reductions") {
    const MapPair pair = haar_gue_pair(20, 6, 0.3);
    const std::size_t bins = 8;
    const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
    const RealMatrix cg = coarse_grain(t, pair.perturbed.phases, bins);

    for (std::size_t j : {0u, 7u, 19u}) {
        const Kernel k = kernel_ideal_binning(pair, bins, EigenstateIndex{j});
        const std::size_t m = band_index(pair.unperturbed.phases[j], bins);
        for (std::size_t r = 0; r < bins; ++r) {
            CHECK(k.empty(r) == (r != m));
        }
        for (std::size_t l = 0; l < bins; ++l) {
            CHECK(k.conditional(m, l) == cg(l, j));
        }
    }

    const Kernel mixed = kernel_ideal_binning(pair, bins, MaximallyMixed{});
    const BandAverage avg = band_average(cg, pair.unperturbed.phases, bins);
    for (std::size_t m = 0; m < bins; ++m) {
        CHECK(mixed.empty(m) == avg.empty(m));
        for (std::size_t l = 0; l < bins && !avg.empty(m); ++l) {
            CHECK(mixed.conditional(m, l) == avg.kernel(m, l));
        }
    }
}

TEST_CASE("kernel_ideal_binning general pure state matches the (j, j', k) triple sum") {
    const MapPair pair = haar_gue_pair(16, 8, 0.25);
    const std::size_t bins = 4;
    const std::size_t n = 16;

    // ψ_o supported on the eigenvectors of one band, random coefficients
    const std::size_t target = band_index(pair.unperturbed.phases[5], bins);
    const CVector coeff = random_state(n, 42);
    CVector psi(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (band_index(pair.unperturbed.phases[j], bins) != target) {
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            psi[i] += coeff[j] * pair.unperturbed.vectors(i, j);
        }
    }
    const double nrm = norm2(psi);
    for (auto& x : psi) {
        x /= nrm;
    }

    const Kernel k = kernel_ideal_binning(pair, bins, PureState{psi});
    CHECK(!k.empty(target));

    std::vector<cplx> c(n);
    double w = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        c[j] = inner(pair.unperturbed.vector(j), psi);
        if (band_index(pair.unperturbed.phases[j], bins) == target) {
            w += std::norm(c[j]);
        }
    }
    for (std::size_t l = 0; l < bins; ++l) {
        double expected = 0.0;
        for (std::size_t kk = 0; kk < n; ++kk) {
            if (band_index(pair.perturbed.phases[kk], bins) != l) {
                continue;
            }
            const CVector pk = pair.perturbed.vector(kk);
            for (std::size_t j = 0; j < n; ++j) {
                if (band_index(pair.unperturbed.phases[j], bins) != target) {
                    continue;
                }
                const cplx bj = inner(pk, pair.unperturbed.vector(j));
                for (std::size_t jp = 0; jp < n; ++jp) {
                    if (band_index(pair.unperturbed.phases[jp], bins) != target) {
                        continue;
                    }
                    const cplx bjp = inner(pk, pair.unperturbed.vector(jp));
                    expected += (c[j] * std::conj(c[jp]) * bj * std::conj(bjp)).real() / w;
                }
            }
        }
        CHECK(std::abs(k.conditional(target, l) - expected) <= 1e-10);
    }
}

TEST_CASE("leakage amplitude matches the direct geometric sum") {
    for (std::size_t bins : {2u, 8u, 32u}) {
        for (double phi : {0.0, 0.1, 1.234, 3.0, 6.2, kTwoPi * 3.0 / 8.0}) {
            for (std::size_t m = 0; m < bins; ++m) {
                CHECK(std::abs(leakage_amplitude(phi, m, bins) - leakage_direct(phi, m, bins)) < 1e-13);
            }
        }
    }
    CHECK(std::abs(leakage_amplitude(kTwoPi * 3.0 / 8.0, 3, 8) - 1.0) < 1e-14);
}

TEST_CASE("kernel_circuit_faithful") {
    SUBCASE("grid alignment removes leakage and reproduces ideal binning") {
        const MapPair pair = grid_aligned_pair(12, 8, 11, 0.7);
        for (const InitMode& init : {InitMode{MaximallyMixed{}}, InitMode{EigenstateIndex{4}},
                                     InitMode{PureState{random_state(12, 3)}}}) {
            const Kernel faithful = kernel_circuit_faithful(pair, 8, init);
            const Kernel ideal = kernel_ideal_binning(pair, 8, init);
            CHECK(max_abs_diff(faithful.joint, ideal.joint) <= 1e-10);
        }
    }

    SUBCASE("single off-grid eigenphase gives the Fejér marginal") {
        const double phi = 1.0;
        const std::size_t bins = 8;
        CVector diag{std::polar(1.0, -phi), std::polar(1.0, -4.0), std::polar(1.0, -5.5)};
        const MapPair pair = build_map_pair(UnitaryOperator(CMatrix::diagonal(diag)),
                                            build_gue_perturbation(3, 2), 0.2);
        std::size_t j = 0;
        while (std::abs(pair.unperturbed.phases[j] - phi) > 1e-12) {
            ++j;
        }
        const Kernel k = kernel_circuit_faithful(pair, bins, EigenstateIndex{j});
        for (std::size_t m = 0; m < bins; ++m) {
            const double theta = phi - kTwoPi * m / bins;
            const double fejer = std::pow(std::sin(bins * theta / 2) / (bins * std::sin(theta / 2)), 2);
            CHECK(k.marginal[m] == doctest::Approx(fejer).epsilon(1e-12));
        }
    }

    SUBCASE("agrees with the statevector simulation") {
        const MapPair pair = haar_gue_pair(16, 12, 0.5);
        const std::size_t bins = 8;
        for (const InitMode& init : {InitMode{MaximallyMixed{}}, InitMode{EigenstateIndex{9}},
                                     InitMode{PureState{random_state(16, 77)}}}) {
            const Kernel oracle = kernel_circuit_faithful(pair, bins, init);
            const Kernel sim = exact_joint_distribution(pair, CircuitConfig{bins, init, 0, 1});
            CHECK(max_abs_diff(oracle.joint, sim.joint) <= 1e-9);
        }
    }
}

TEST_CASE("kernels are invariant under eigenvector phase changes") {
    const MapPair pair = haar_gue_pair(12, 21, 0.4);
    MapPair rotated = pair;
    for (std::size_t j = 0; j < 12; ++j) {
        const cplx g = std::polar(1.0, 0.37 * static_cast<double>(j * j + 1));
        for (std::size_t i = 0; i < 12; ++i) {
            rotated.unperturbed.vectors(i, j) *= g;
            rotated.perturbed.vectors(i, j) *= std::polar(1.0, -1.1 * static_cast<double>(j));
        }
    }
    const CVector psi = random_state(12, 9);
    for (const InitMode& init : {InitMode{MaximallyMixed{}}, InitMode{EigenstateIndex{3}}, InitMode{PureState{psi}}}) {
        CHECK(max_abs_diff(kernel_ideal_binning(pair, 4, init).joint, kernel_ideal_binning(rotated, 4, init).joint) <= 1e-9);
        CHECK(max_abs_diff(kernel_circuit_faithful(pair, 4, init).joint,
                           kernel_circuit_faithful(rotated, 4, init).joint) <= 1e-9);
    }
}

TEST_CASE("ideal and faithful kernels converge as phases approach the grid") {
    const std::size_t bins = 8;
    const MapPair base = grid_aligned_pair(10, bins, 31, 0.5);
    double previous = 1.0;
    for (double shift : {0.2, 0.05, 0.01, 0.001, 0.0}) {
        MapPair p = base;
        for (auto& phi : p.unperturbed.phases) {
            phi = std::fmod(phi + shift * kTwoPi / bins, kTwoPi);
        }
        for (auto& phi : p.perturbed.phases) {
            phi = std::fmod(phi + shift * kTwoPi / bins, kTwoPi);
        }
        const double diff = max_abs_diff(kernel_ideal_binning(p, bins, MaximallyMixed{}).joint,
                                         kernel_circuit_faithful(p, bins, MaximallyMixed{}).joint);
        CHECK(diff <= previous + 1e-15);
        previous = diff;
    }
    CHECK(previous <= 1e-10);
}

TEST_CASE("mean phase shift obeys first-order perturbation theory") {
    const UnitaryOperator u = build_haar_random(16, 41);
    const HermitianOperator v = build_gue_perturbation(16, 42);
    for (double delta : {1e-3, 5e-4}) {
        const MapPair pair = build_map_pair(u, v, delta);
        const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
        const CMatrix w = in_eigenbasis(pair.unperturbed, v);
        for (std::size_t j = 0; j < 16; ++j) {
            double shift = 0.0;
            for (std::size_t k = 0; k < 16; ++k) {
                shift += t.p(k, j) * wrap_angle(pair.perturbed.phases[k] - pair.unperturbed.phases[j]);
            }
            CHECK(std::abs(shift - delta * w(j, j).real()) <= 10.0 * delta * delta);
        }
    }
}

TEST_CASE("ldos_from_kernel") {
    const MapPair still = build_map_pair(build_diagonal_grid(16, 8, 3), build_gue_perturbation(16, 4), 0.0);
    const Kernel k0 = kernel_ideal_binning(still, 8, MaximallyMixed{});
    for (std::size_t m = 0; m < 8; ++m) {
        if (k0.empty(m)) {
            CHECK_THROWS_AS(ldos_from_kernel(k0, m), DegenerateInputError);
            continue;
        }
        const LdosProfile p = ldos_from_kernel(k0, m);
        CHECK(p.weight_at(0) == 1.0);
        CHECK(*p.anchor == m);
    }

    RealMatrix flat(4, 4, 0.25);
    const Kernel uniform = make_kernel(flat, {0.25, 0.25, 0.25, 0.25});
    const LdosProfile up = ldos_from_kernel(uniform, 2);
    CHECK(up.offsets == std::vector<int>{-2, -1, 0, 1});
    for (double w : up.weights) {
        CHECK(w == doctest::Approx(0.25));
    }
}

TEST_CASE("aggregated LDOS matches a continuous-phase histogram within one bin") {
    const std::size_t n = 64;
    const std::size_t bins = 16;
    const UnitaryOperator u = build_haar_random(n, 51);
    const HermitianOperator v = build_gue_perturbation(n, 52);
    // Γ = 2πσ²ρ_E = σ² N ≈ 0.5
    const double unit_sigma = effective_strength(eig_unitary(u), v, 1.0);
    const double delta = std::sqrt(0.5 / static_cast<double>(n)) / unit_sigma;
    const MapPair pair = build_map_pair(u, v, delta);

    const LdosProfile profile = aggregated_ldos(kernel_ideal_binning(pair, bins, MaximallyMixed{}));
    const TransitionMatrix t = transition_matrix(pair.unperturbed, pair.perturbed);
    std::vector<double> hist(bins, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = wrap_angle(pair.perturbed.phases[k] - pair.unperturbed.phases[j]);
            const long slot = std::lround(d * bins / kTwoPi);
            const int off = wrap_offset(static_cast<std::size_t>((slot % static_cast<long>(bins) + bins) % bins), 0, bins);
            hist[static_cast<std::size_t>(off + static_cast<int>(bins / 2))] += t.p(k, j) / n;
        }
    }
    // cumulative distributions agree up to a shift of one bin
    double cum_profile = 0.0;
    std::vector<double> cum_hist(bins + 1, 0.0);
    for (std::size_t i = 0; i < bins; ++i) {
        cum_hist[i + 1] = cum_hist[i] + hist[i];
    }
    for (std::size_t i = 0; i < bins; ++i) {
        cum_profile += profile.weights[i];
        const double lo = cum_hist[i > 0 ? i : 0];
        const double hi = cum_hist[std::min(i + 2, bins)];
        CHECK(cum_profile >= lo - 1e-9);
        CHECK(cum_profile <= hi + 1e-9);
    }
}
