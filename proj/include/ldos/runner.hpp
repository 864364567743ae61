#pragma once

#include "ldos/circuit.hpp"
#include "ldos/kernel.hpp"
#include "ldos/models.hpp"
#include "ldos/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ldos {

inline constexpr std::string_view kVersion = "0.1.0";

// Hypothesis template; an empty width means "use the predicted width".
struct HypothesisTemplate {
    ProfileFamily family = ProfileFamily::breit_wigner;
    std::optional<double> width;
};

struct AnalysisConfig {
    std::vector<HypothesisTemplate> hypotheses; // exactly two
    double epsilon = 0.05;
    double decision_threshold = kDefaultDecisionThreshold;
    PairOptions pair;
    RegimeThresholds regime;
};

struct OutputConfig {
    std::filesystem::path directory = "ldos_out";
    bool csv = true;
    bool json = true;
    bool persist_matrices = false;
};

struct ExperimentConfig {
    ModelSpec model;
    ModelSpec perturbation;
    double delta = 0.0;
    CircuitConfig circuit;
    AnalysisConfig analysis;
    OutputConfig output;
};

// Parses and validates a JSON document. Unknown keys and invalid values
// raise ConfigError naming the field path (parse errors name the line).
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical JSON rendering of a validated config, defaults included.
std::string canonical_config(const ExperimentConfig& cfg);

// 64-bit FNV-1a
std::uint64_t fnv1a(std::string_view bytes);

// Shortest round-trip decimal; integral values keep a trailing ".0".
std::string format_double(double x);

// CSV emitters; values use format_double.
std::string profile_csv(const LdosProfile& profile);
std::string kernel_csv(const RealMatrix& p, const RealMatrix* stderr_, const std::vector<bool>& emit_row);
std::string kernel_csv(const Kernel& kernel);
std::string kernel_csv(const KernelEstimate& estimate);
std::string counts_csv(const JointCounts& counts);

// Profile CSV reader (offset,phi,weight) returning the weight column in file order.
std::vector<double> read_profile_weights(const std::filesystem::path& path);

// h1, h2 with "predicted" widths resolved. A Gaussian uses the Breit-Wigner FWHM:
// s = Γ/(2√(2 ln 2)). Γ = 0 is clamped to the lower width search bound.
std::vector<ProfileHypothesis> resolve_hypotheses(const AnalysisConfig& analysis, double predicted, std::size_t bins);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunManifest {
    std::string config_hash;
    std::string version{kVersion};
    std::vector<StageTiming> timings;
    double sigma = 0.0;
    std::size_t bandwidth = 0;
    double level_density = 0.0;
    double predicted_gamma = 0.0;
    Regime regime = Regime::perturbative;
    std::uint64_t model_seed = 0;
    std::uint64_t perturbation_seed = 0;
    std::uint64_t circuit_seed = 0;
    std::uint64_t shots = 0;
    std::vector<std::string> files;
    std::vector<std::string> warnings;
    std::string status = "ok";
    std::string failed_stage;
    std::string error;
};

struct RunOptions {
    bool oracle_only = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
};

// Runs the full pipeline and writes all artifacts. On failure the files of
// this run are removed, a manifest recording the failed stage is written when
// possible, and the original exception is rethrown.
RunManifest run_experiment(ExperimentConfig cfg, const RunOptions& options = {});

// Process exit code for an exception: 2 validation, 3 I/O, 4 numerical, 1 other.
int exit_code_for(const std::exception& e);

} // namespace ldos
