#pragma once

#include "ldos/circuit.hpp"
#include "ldos/kernel.hpp"
#include "ldos/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace ldos {

// Sampled (m, l) outcomes; counts indexed (m, l).
struct JointCounts {
    std::size_t bins = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    std::uint64_t at(std::size_t m, std::size_t l) const { return counts[m * bins + l]; }
    std::uint64_t row_total(std::size_t m) const;

    JointCounts& operator+=(const JointCounts& other);
    friend bool operator==(const JointCounts&, const JointCounts&) = default;
};

JointCounts accumulate(std::span<const ShotRecord> shots, std::size_t bins);

// Row-normalized counts with binomial standard errors √(p̂(1−p̂)/K_m).
// A row holding a single count gets the largest possible error, 0.5, in every cell.
struct KernelEstimate {
    std::size_t bins = 0;
    RealMatrix p;
    RealMatrix stderr_;
    std::vector<std::uint64_t> row_totals;

    bool empty(std::size_t m) const { return row_totals[m] == 0; }
};

KernelEstimate estimate_kernel(const JointCounts& counts);

// Kernel built from the sampled joint frequencies (empty rows where unsampled).
Kernel empirical_kernel(const JointCounts& counts);

// Shot counts pooled by wrapped offset l − m, ordered as wrapped_offsets(bins).
std::vector<double> offset_counts(const JointCounts& counts);

enum class ProfileFamily { breit_wigner, gaussian };

std::string_view to_string(ProfileFamily family);
std::optional<ProfileFamily> parse_family(std::string_view name);

struct ProfileHypothesis {
    ProfileFamily family = ProfileFamily::breit_wigner;
    double width = 1.0; // Γ for Breit-Wigner, standard deviation for Gaussian (radians)
};

// Continuous profile evaluated at bin centres φ_k = 2πk/M, normalized over
// the M wrapped offsets (ordered as wrapped_offsets(bins)).
std::vector<double> discretize_profile(const ProfileHypothesis& h, std::size_t bins);

struct WidthFit {
    double width = 0.0;
    double log_likelihood = 0.0;
    bool degenerate = false;
};

// Multinomial maximum-likelihood width; `weights` are counts (or profile
// weights) over wrapped offsets. Search on log-width over [2π/(10M), 20π].
WidthFit fit_width(std::span<const double> weights, ProfileFamily family);

// Γ(σ) = 2πσ²ρ_E
double predicted_gamma(double sigma, double rho);

enum class Regime { perturbative, bw_valid, saturated };

std::string_view to_string(Regime regime);

struct RegimeThresholds {
    double lower = 3.0;       // σρ_E ≤ lower ⇒ perturbative
    double upper = 1.0 / 3.0; // σρ_E ≥ upper·√b ⇒ saturated
};

Regime regime_check(double sigma, double rho, std::size_t bandwidth, const RegimeThresholds& thresholds = {});

struct ChernoffResult {
    double lambda = 1.0;
    double alpha = 0.5;
};

// λ = min_{α∈[0,1]} Σ P1^α P2^{1−α}
ChernoffResult chernoff_lambda(std::span<const double> p1, std::span<const double> p2);

double bhattacharyya(std::span<const double> p1, std::span<const double> p2);

// ⌈log ε / log λ⌉. λ = 0 gives 1; λ within 1e-12 of 1 gives no finite sample size.
std::optional<std::uint64_t> required_samples(double lambda, double epsilon);

enum class Decision { h1, h2, inconclusive };

std::string_view to_string(Decision decision);

inline const double kDefaultDecisionThreshold = std::log(20.0);

struct TestContext {
    double threshold = kDefaultDecisionThreshold;
    double epsilon = 0.05;
    double predicted_width = 0.0;
    Regime regime = Regime::perturbative;
};

struct TestReport {
    double lambda = 1.0;
    double alpha_star = 0.5;
    std::optional<std::uint64_t> k_required;
    std::uint64_t k_used = 0;
    double log_likelihood_ratio = 0.0;
    Decision decision = Decision::inconclusive;
    double fitted_width = 0.0;
    bool fit_degenerate = false;
    double predicted_width = 0.0;
    Regime regime = Regime::perturbative;
    bool probability_floor_applied = false;
    double threshold = kDefaultDecisionThreshold;
};

// Likelihood-ratio test of h1 against h2 on counts over wrapped offsets.
TestReport decide(std::span<const double> counts, const ProfileHypothesis& h1, const ProfileHypothesis& h2,
                  const TestContext& context = {});

// Same test on already-discretized hypotheses.
TestReport decide(std::span<const double> counts, std::span<const double> p1, std::span<const double> p2,
                  const TestContext& context = {});

// Multinomial draw of `k` samples from `p`.
std::vector<std::uint64_t> sample_multinomial(std::span<const double> p, std::uint64_t k, std::mt19937_64& rng);

struct ChiSquare {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

// Pearson test; cells with expected count below 5 are pooled into one cell.
ChiSquare chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> expected_probabilities);

double total_variation(std::span<const double> p, std::span<const double> q);

} // namespace ldos
