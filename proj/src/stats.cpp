#include "ldos/stats.hpp"

#include "ldos/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace ldos {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr double kNormalizationTol = 1e-9;
constexpr double kIndistinguishable = 1e-12;
constexpr double kInvPhi = 0.6180339887498948482; // 1/golden ratio

void require_distribution(std::span<const double> p, const char* name) {
    double total = 0.0;
    for (double x : p) {
        if (!(x >= 0.0)) {
            throw PreconditionError(std::string(name) + " has a negative or non-finite entry");
        }
        total += x;
    }
    if (std::abs(total - 1.0) > kNormalizationTol) {
        throw PreconditionError(std::string(name) + " is not normalized (sum " + std::to_string(total) + ")");
    }
}

// Golden-section minimization of a unimodal f on [a, b] until b − a ≤ tol.
template <class F>
double golden_minimize(F&& f, double a, double b, double tol) {
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double log_likelihood(std::span<const double> weights, std::span<const double> p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (weights[i] > 0.0) {
            ll += weights[i] * std::log(std::max(p[i], std::numeric_limits<double>::min()));
        }
    }
    return ll;
}

} // namespace

std::uint64_t JointCounts::row_total(std::size_t m) const {
    std::uint64_t t = 0;
    for (std::size_t l = 0; l < bins; ++l) {
        t += at(m, l);
    }
    return t;
}

JointCounts& JointCounts::operator+=(const JointCounts& other) {
    if (other.bins != bins) {
        throw DataError("cannot merge counts with different bin numbers");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        counts[i] += other.counts[i];
    }
    total += other.total;
    return *this;
}

JointCounts accumulate(std::span<const ShotRecord> shots, std::size_t bins) {
    JointCounts out{bins, std::vector<std::uint64_t>(bins * bins, 0), 0};
    for (const auto& s : shots) {
        if (s.m >= bins || s.l >= bins) {
            throw DataError("shot " + std::to_string(s.shot_index) + " has outcome (" + std::to_string(s.m) + ", " +
                            std::to_string(s.l) + ") outside " + std::to_string(bins) + " bins");
        }
        ++out.counts[s.m * bins + s.l];
        ++out.total;
    }
    return out;
}

KernelEstimate estimate_kernel(const JointCounts& counts) {
    const std::size_t bins = counts.bins;
    KernelEstimate est{bins, RealMatrix(bins, bins), RealMatrix(bins, bins), std::vector<std::uint64_t>(bins)};
    for (std::size_t m = 0; m < bins; ++m) {
        const std::uint64_t k = counts.row_total(m);
        est.row_totals[m] = k;
        if (k == 0) {
            continue;
        }
        for (std::size_t l = 0; l < bins; ++l) {
            const double p = static_cast<double>(counts.at(m, l)) / static_cast<double>(k);
            est.p(m, l) = p;
            est.stderr_(m, l) = k == 1 ? 0.5 : std::sqrt(p * (1.0 - p) / static_cast<double>(k));
        }
    }
    return est;
}

Kernel empirical_kernel(const JointCounts& counts) {
    RealMatrix joint(counts.bins, counts.bins);
    if (counts.total > 0) {
        for (std::size_t i = 0; i < counts.counts.size(); ++i) {
            joint.data()[i] = static_cast<double>(counts.counts[i]) / static_cast<double>(counts.total);
        }
    }
    return make_kernel(std::move(joint));
}

std::vector<double> offset_counts(const JointCounts& counts) {
    const std::size_t bins = counts.bins;
    const int lo = static_cast<int>(bins / 2);
    std::vector<double> out(bins, 0.0);
    for (std::size_t m = 0; m < bins; ++m) {
        for (std::size_t l = 0; l < bins; ++l) {
            out[static_cast<std::size_t>(wrap_offset(l, m, bins) + lo)] += static_cast<double>(counts.at(m, l));
        }
    }
    return out;
}

std::string_view to_string(ProfileFamily family) {
    return family == ProfileFamily::breit_wigner ? "breit_wigner" : "gaussian";
}

std::optional<ProfileFamily> parse_family(std::string_view name) {
    if (name == "breit_wigner" || name == "bw") {
        return ProfileFamily::breit_wigner;
    }
    if (name == "gaussian" || name == "gauss") {
        return ProfileFamily::gaussian;
    }
    return std::nullopt;
}

std::vector<double> discretize_profile(const ProfileHypothesis& h, std::size_t bins) {
    if (!(h.width > 0.0) || !std::isfinite(h.width)) {
        throw ParameterError("profile width must be positive, got " + std::to_string(h.width));
    }
    if (bins < 2) {
        throw ParameterError("profile needs at least 2 bins");
    }
    std::vector<double> w;
    w.reserve(bins);
    for (int k : wrapped_offsets(bins)) {
        const double phi = kTwoPi * k / static_cast<double>(bins);
        if (h.family == ProfileFamily::breit_wigner) {
            w.push_back(h.width / (phi * phi + 0.25 * h.width * h.width));
        } else {
            w.push_back(std::exp(-phi * phi / (2.0 * h.width * h.width)));
        }
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) {
        x /= total;
    }
    return w;
}

WidthFit fit_width(std::span<const double> weights, ProfileFamily family) {
    const std::size_t bins = weights.size();
    const double lo = std::log(kTwoPi / (10.0 * static_cast<double>(bins)));
    const double hi = std::log(10.0 * kTwoPi);
    const auto nll = [&](double log_width) {
        return -log_likelihood(weights, discretize_profile({family, std::exp(log_width)}, bins));
    };

    const auto nonzero = std::count_if(weights.begin(), weights.end(), [](double x) { return x > 0.0; });
    if (nonzero < 2) {
        return {std::exp(lo), -nll(lo), true};
    }

    // coarse scan brackets the global optimum, golden section refines it
    constexpr int kGrid = 200;
    int best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double v = nll(lo + (hi - lo) * i / kGrid);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    const double a = lo + (hi - lo) * std::max(best - 1, 0) / kGrid;
    const double b = lo + (hi - lo) * std::min(best + 1, kGrid) / kGrid;
    double x = golden_minimize(nll, a, b, 1e-7);
    if (nll(x) > best_value) {
        x = lo + (hi - lo) * best / kGrid;
    }
    return {std::exp(x), -nll(x), false};
}

double predicted_gamma(double sigma, double rho) {
    return kTwoPi * sigma * sigma * rho;
}

std::string_view to_string(Regime regime) {
    switch (regime) {
    case Regime::perturbative:
        return "perturbative";
    case Regime::bw_valid:
        return "bw_valid";
    case Regime::saturated:
        return "saturated";
    }
    return "unknown";
}

Regime regime_check(double sigma, double rho, std::size_t bandwidth, const RegimeThresholds& thresholds) {
    const double x = sigma * rho;
    if (x <= thresholds.lower) {
        return Regime::perturbative;
    }
    if (x < thresholds.upper * std::sqrt(static_cast<double>(bandwidth))) {
        return Regime::bw_valid;
    }
    return Regime::saturated;
}

ChernoffResult chernoff_lambda(std::span<const double> p1, std::span<const double> p2) {
    if (p1.size() != p2.size()) {
        throw PreconditionError("distributions have different supports");
    }
    require_distribution(p1, "P1");
    require_distribution(p2, "P2");
    const auto f = [&](double alpha) {
        double s = 0.0;
        for (std::size_t i = 0; i < p1.size(); ++i) {
            if (p1[i] > 0.0 && p2[i] > 0.0) {
                s += std::pow(p1[i], alpha) * std::pow(p2[i], 1.0 - alpha);
            }
        }
        return s;
    };
    ChernoffResult best{f(0.5), 0.5};
    const double alpha = golden_minimize(f, 0.0, 1.0, 1e-8);
    for (double a : {alpha, 0.0, 1.0}) {
        const double v = f(a);
        if (v < best.lambda) {
            best = {v, a};
        }
    }
    best.lambda = std::clamp(best.lambda, 0.0, 1.0);
    return best;
}

double bhattacharyya(std::span<const double> p1, std::span<const double> p2) {
    double s = 0.0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        s += std::sqrt(p1[i] * p2[i]);
    }
    return s;
}

std::optional<std::uint64_t> required_samples(double lambda, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw ParameterError("epsilon must lie in (0, 1)");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ParameterError("lambda must lie in [0, 1]");
    }
    if (lambda == 0.0) {
        return 1;
    }
    if (lambda >= 1.0 - kIndistinguishable) {
        return std::nullopt;
    }
    return static_cast<std::uint64_t>(std::ceil(std::log(epsilon) / std::log(lambda)));
}

std::string_view to_string(Decision decision) {
    switch (decision) {
    case Decision::h1:
        return "h1";
    case Decision::h2:
        return "h2";
    case Decision::inconclusive:
        return "inconclusive";
    }
    return "unknown";
}

TestReport decide(std::span<const double> counts, std::span<const double> p1, std::span<const double> p2,
                  const TestContext& context) {
    if (counts.size() != p1.size() || counts.size() != p2.size()) {
        throw PreconditionError("data and hypotheses must share the same support");
    }
    TestReport report;
    const ChernoffResult c = chernoff_lambda(p1, p2);
    report.lambda = c.lambda;
    report.alpha_star = c.alpha;
    report.k_required = required_samples(c.lambda, context.epsilon);
    report.predicted_width = context.predicted_width;
    report.regime = context.regime;
    report.threshold = context.threshold;

    double llr = 0.0;
    double used = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] <= 0.0) {
            continue;
        }
        used += counts[i];
        if (p1[i] < kProbabilityFloor || p2[i] < kProbabilityFloor) {
            report.probability_floor_applied = true;
        }
        llr += counts[i] * (std::log(std::max(p1[i], kProbabilityFloor)) - std::log(std::max(p2[i], kProbabilityFloor)));
    }
    report.k_used = static_cast<std::uint64_t>(std::llround(used));
    report.log_likelihood_ratio = llr;
    if (llr > context.threshold) {
        report.decision = Decision::h1;
    } else if (llr < -context.threshold) {
        report.decision = Decision::h2;
    } else {
        report.decision = Decision::inconclusive;
    }
    return report;
}

TestReport decide(std::span<const double> counts, const ProfileHypothesis& h1, const ProfileHypothesis& h2,
                  const TestContext& context) {
    const std::vector<double> p1 = discretize_profile(h1, counts.size());
    const std::vector<double> p2 = discretize_profile(h2, counts.size());
    TestReport report = decide(counts, p1, p2, context);
    const WidthFit fit = fit_width(counts, h1.family);
    report.fitted_width = fit.width;
    report.fit_degenerate = fit.degenerate;
    return report;
}

std::vector<std::uint64_t> sample_multinomial(std::span<const double> p, std::uint64_t k, std::mt19937_64& rng) {
    std::vector<std::uint64_t> out(p.size(), 0);
    double remaining_mass = 1.0;
    std::uint64_t remaining = k;
    for (std::size_t i = 0; i + 1 < p.size() && remaining > 0; ++i) {
        const double q = remaining_mass > 0.0 ? std::clamp(p[i] / remaining_mass, 0.0, 1.0) : 0.0;
        std::binomial_distribution<std::uint64_t> draw(remaining, q);
        out[i] = draw(rng);
        remaining -= out[i];
        remaining_mass -= p[i];
    }
    if (!p.empty()) {
        out.back() += remaining;
    }
    return out;
}

ChiSquare chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> expected_probabilities) {
    if (observed.size() != expected_probabilities.size()) {
        throw PreconditionError("observed and expected have different sizes");
    }
    const double k = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::uint64_t{0}));
    ChiSquare out;
    if (k == 0.0) {
        return out;
    }
    double pooled_obs = 0.0;
    double pooled_exp = 0.0;
    std::size_t cells = 0;
    const auto add = [&](double o, double e) {
        if (e <= 0.0) {
            if (o > 0.0) {
                out.statistic = std::numeric_limits<double>::infinity();
            }
            return;
        }
        out.statistic += (o - e) * (o - e) / e;
        ++cells;
    };
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = k * expected_probabilities[i];
        const double o = static_cast<double>(observed[i]);
        if (e < 5.0) {
            pooled_obs += o;
            pooled_exp += e;
        } else {
            add(o, e);
        }
    }
    if (pooled_exp > 0.0 || pooled_obs > 0.0) {
        add(pooled_obs, pooled_exp);
    }
    out.dof = cells > 0 ? cells - 1 : 0;
    if (!std::isfinite(out.statistic)) {
        out.p_value = 0.0;
    } else if (out.dof > 0) {
        out.p_value = boost::math::gamma_q(0.5 * static_cast<double>(out.dof), 0.5 * out.statistic);
    }
    return out;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        s += std::abs(p[i] - q[i]);
    }
    return 0.5 * s;
}

} // namespace ldos
