#include "ldos/runner.hpp"

#include "ldos/errors.hpp"
#include "ldos/oracle.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ldos {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// anything left over can be rejected by name.
class Fields {
public:
    Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            fail("", "expected an object");
        }
    }

    const json* find(const std::string& key) {
        used_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(field(key) + ": " + what);
    }

    std::string field(const std::string& key) const {
        if (key.empty()) {
            return path_.empty() ? "<root>" : path_;
        }
        return path_.empty() ? key : path_ + "." + key;
    }

    double number(const std::string& key, std::optional<double> fallback) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) {
                fail(key, "required field missing");
            }
            return *fallback;
        }
        if (!v->is_number()) {
            fail(key, "expected a number");
        }
        return v->get<double>();
    }

    std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) {
                fail(key, "required field missing");
            }
            return *fallback;
        }
        if (!v->is_number_unsigned()) {
            fail(key, "expected a non-negative integer");
        }
        return v->get<std::uint64_t>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) {
                fail(key, "required field missing");
            }
            return *fallback;
        }
        if (!v->is_string()) {
            fail(key, "expected a string");
        }
        return v->get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = find(key);
        if (!v) {
            return fallback;
        }
        if (!v->is_boolean()) {
            fail(key, "expected true or false");
        }
        return v->get<bool>();
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!used_.contains(key)) {
                fail(key, "unknown key");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

ModelSpec parse_model(const json& node, const std::string& path, std::optional<std::size_t> dimension) {
    Fields f(node, path);
    ModelSpec spec;
    const std::string kind = f.string("kind", std::nullopt);
    const auto parsed = parse_model_kind(kind);
    if (!parsed) {
        f.fail("kind", "unknown model kind '" + kind + "'");
    }
    spec.kind = *parsed;
    spec.dimension = f.integer("dimension", dimension);
    if (spec.dimension < 2) {
        f.fail("dimension", "must be at least 2");
    }
    spec.seed = f.integer("seed", std::nullopt);
    spec.tau = f.number("tau", 1.0);
    spec.grid_bins = f.integer("grid_bins", 0);
    spec.band_half_width = f.integer("band_half_width", 0);
    f.finish();
    return spec;
}

InitMode parse_init(const json& node, std::size_t dimension) {
    const std::string path = "circuit.init";
    if (node.is_string()) {
        if (node.get<std::string>() != "maximally_mixed") {
            throw ConfigError(path + ": expected \"maximally_mixed\" or an object");
        }
        return MaximallyMixed{};
    }
    Fields f(node, path);
    const json* eig = f.find("eigenstate_index");
    const json* pure = f.find("pure_state");
    f.finish();
    if ((eig != nullptr) == (pure != nullptr)) {
        f.fail("", "give exactly one of eigenstate_index, pure_state");
    }
    if (eig) {
        if (!eig->is_number_unsigned() || eig->get<std::uint64_t>() >= dimension) {
            f.fail("eigenstate_index", "must be an integer in [0, " + std::to_string(dimension) + ")");
        }
        return EigenstateIndex{eig->get<std::size_t>()};
    }
    if (!pure->is_array() || pure->size() != dimension) {
        f.fail("pure_state", "must list " + std::to_string(dimension) + " [re, im] pairs");
    }
    CVector amplitudes;
    for (const auto& pair : *pure) {
        if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
            f.fail("pure_state", "entries must be [re, im] number pairs");
        }
        amplitudes.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    if (!is_normalized(amplitudes, 1e-10)) {
        f.fail("pure_state", "state is not normalized");
    }
    return PureState{std::move(amplitudes)};
}

HypothesisTemplate parse_hypothesis(const json& node, const std::string& path) {
    Fields f(node, path);
    HypothesisTemplate h;
    const std::string family = f.string("family", std::nullopt);
    const auto parsed = parse_family(family);
    if (!parsed) {
        f.fail("family", "unknown profile family '" + family + "'");
    }
    h.family = *parsed;
    const json* width = f.find("width");
    if (!width || (width->is_string() && width->get<std::string>() == "predicted")) {
        h.width = std::nullopt;
    } else if (width->is_number() && width->get<double>() > 0.0) {
        h.width = width->get<double>();
    } else {
        f.fail("width", "expected a positive number or \"predicted\"");
    }
    f.finish();
    return h;
}

json init_to_json(const InitMode& init) {
    if (std::holds_alternative<MaximallyMixed>(init)) {
        return "maximally_mixed";
    }
    if (const auto* e = std::get_if<EigenstateIndex>(&init)) {
        return json{{"eigenstate_index", e->index}};
    }
    json amps = json::array();
    for (const cplx& a : std::get<PureState>(init).amplitudes) {
        amps.push_back({a.real(), a.imag()});
    }
    return json{{"pure_state", amps}};
}

json model_to_json(const ModelSpec& m) {
    return json{{"kind", std::string(to_string(m.kind))}, {"dimension", m.dimension}, {"seed", m.seed},
                {"tau", m.tau}, {"grid_bins", m.grid_bins}, {"band_half_width", m.band_half_width}};
}

json matrix_to_json(const CMatrix& a) {
    json rows = json::array();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < a.cols(); ++j) {
            row.push_back({a(i, j).real(), a(i, j).imag()});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json report_to_json(const TestReport& r, std::string_view source) {
    return json{{"source", source},
                {"lambda", r.lambda},
                {"alpha_star", r.alpha_star},
                {"k_required", r.k_required ? json(*r.k_required) : json(nullptr)},
                {"k_used", r.k_used},
                {"log_likelihood_ratio", r.log_likelihood_ratio},
                {"decision", to_string(r.decision)},
                {"threshold", r.threshold},
                {"fitted_width", r.fitted_width},
                {"fit_degenerate", r.fit_degenerate},
                {"predicted_width", r.predicted_width},
                {"regime", to_string(r.regime)},
                {"probability_floor_applied", r.probability_floor_applied}};
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

bool is_artifact_name(const std::string& name) {
    static const std::set<std::string> top{"joint_counts.csv", "kernel_estimate.csv", "kernel_ideal.csv",
                                           "kernel_faithful.csv", "report.json", "matrices.json", "manifest.json"};
    return top.contains(name);
}

bool is_profile_name(const std::string& name) {
    return name.ends_with(".csv") &&
           (name.starts_with("sampled_") || name.starts_with("ideal_") || name.starts_with("faithful_"));
}

// Tracks files written by one run so a failure can remove them.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

    void prepare() {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) {
            throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
        }
        // stale artifacts from an earlier run would otherwise survive (e.g. a zero-shot rerun)
        for (const auto& entry : fs::directory_iterator(root_)) {
            if (entry.is_regular_file() && is_artifact_name(entry.path().filename().string())) {
                fs::remove(entry.path());
            }
        }
        const fs::path profiles = root_ / "profiles";
        if (fs::is_directory(profiles)) {
            for (const auto& entry : fs::directory_iterator(profiles)) {
                if (entry.is_regular_file() && is_profile_name(entry.path().filename().string())) {
                    fs::remove(entry.path());
                }
            }
        }
    }

    void write(const std::string& relative, const std::string& content) {
        const fs::path target = root_ / relative;
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + target.parent_path().string() + ": " + ec.message());
        }
        std::ofstream out(target, std::ios::binary | std::ios::trunc);
        written_.push_back(relative);
        out << content;
        out.close();
        if (!out) {
            throw IoError("cannot write " + target.string());
        }
    }

    void remove_all() {
        for (const auto& rel : written_) {
            std::error_code ec;
            fs::remove(root_ / rel, ec);
        }
        written_.clear();
    }

    const std::vector<std::string>& written() const { return written_; }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::vector<std::string> written_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string manifest_json(const RunManifest& m, const ExperimentConfig& cfg) {
    json timings = json::array();
    for (const auto& t : m.timings) {
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    }
    json out{{"config_hash", m.config_hash},
             {"version", m.version},
             {"status", m.status},
             {"timings", timings},
             {"derived",
              {{"sigma", m.sigma},
               {"bandwidth", m.bandwidth},
               {"level_density", m.level_density},
               {"sigma_rho", m.sigma * m.level_density},
               {"predicted_gamma", m.predicted_gamma},
               {"regime", to_string(m.regime)}}},
             {"seeds", {{"model", m.model_seed}, {"perturbation", m.perturbation_seed}, {"circuit", m.circuit_seed}}},
             {"shots", m.shots},
             {"files", m.files},
             {"warnings", m.warnings},
             {"config", json::parse(canonical_config(cfg))}};
    if (m.status != "ok") {
        out["failed_stage"] = m.failed_stage;
        out["error"] = m.error;
    }
    return out.dump(2) + "\n";
}

} // namespace

ExperimentConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError("parse error at line " + std::to_string(line) + ": " + e.what());
    }

    Fields root(doc, "");
    ExperimentConfig cfg;

    const json* model = root.find("model");
    if (!model) {
        root.fail("model", "required field missing");
    }
    cfg.model = parse_model(*model, "model", std::nullopt);
    const std::size_t n = cfg.model.dimension;

    if (const json* pert = root.find("perturbation")) {
        cfg.perturbation = parse_model(*pert, "perturbation", n);
    } else {
        cfg.perturbation = ModelSpec{ModelKind::gue_kick, n, cfg.model.seed + 1};
    }
    if (cfg.perturbation.dimension != n) {
        throw ConfigError("perturbation.dimension: must equal model.dimension (" + std::to_string(n) + ")");
    }
    if (cfg.perturbation.kind != ModelKind::gue_kick && cfg.perturbation.kind != ModelKind::diagonal_grid) {
        throw ConfigError("perturbation.kind: must be gue_kick or diagonal_grid");
    }

    cfg.delta = root.number("delta", 0.0);
    if (!(cfg.delta >= 0.0) || !std::isfinite(cfg.delta)) {
        root.fail("delta", "must be a finite number ≥ 0");
    }

    if (const json* circuit = root.find("circuit")) {
        Fields f(*circuit, "circuit");
        cfg.circuit.m_bins = f.integer("m_bins", 8);
        if (cfg.circuit.m_bins < 2) {
            f.fail("m_bins", "must be at least 2");
        }
        cfg.circuit.shots = f.integer("shots", 0);
        cfg.circuit.seed = f.integer("seed", 0);
        if (const json* init = f.find("init")) {
            cfg.circuit.init = parse_init(*init, n);
        }
        f.finish();
    }

    cfg.analysis.hypotheses = {{ProfileFamily::breit_wigner, std::nullopt}, {ProfileFamily::gaussian, std::nullopt}};
    if (const json* analysis = root.find("analysis")) {
        Fields f(*analysis, "analysis");
        AnalysisConfig& a = cfg.analysis;
        if (const json* hs = f.find("hypotheses")) {
            if (!hs->is_array() || hs->size() != 2) {
                f.fail("hypotheses", "expected a list of exactly two hypotheses");
            }
            a.hypotheses = {parse_hypothesis((*hs)[0], "analysis.hypotheses[0]"),
                            parse_hypothesis((*hs)[1], "analysis.hypotheses[1]")};
        }
        a.epsilon = f.number("epsilon", 0.05);
        if (!(a.epsilon > 0.0 && a.epsilon < 1.0)) {
            f.fail("epsilon", "must lie in (0, 1)");
        }
        a.decision_threshold = f.number("decision_threshold", kDefaultDecisionThreshold);
        if (!(a.decision_threshold >= 0.0)) {
            f.fail("decision_threshold", "must be ≥ 0");
        }
        a.pair.coupling_threshold = f.number("coupling_threshold", 0.01);
        if (!(a.pair.coupling_threshold > 0.0 && a.pair.coupling_threshold < 1.0)) {
            f.fail("coupling_threshold", "must lie in (0, 1)");
        }
        a.pair.mass_fraction = f.number("mass_fraction", 0.95);
        if (!(a.pair.mass_fraction > 0.0 && a.pair.mass_fraction <= 1.0)) {
            f.fail("mass_fraction", "must lie in (0, 1]");
        }
        a.regime.lower = f.number("regime_c_lo", 3.0);
        a.regime.upper = f.number("regime_c_hi", 1.0 / 3.0);
        if (!(a.regime.lower > 0.0)) {
            f.fail("regime_c_lo", "must be positive");
        }
        if (!(a.regime.upper > 0.0)) {
            f.fail("regime_c_hi", "must be positive");
        }
        f.finish();
    }

    if (const json* output = root.find("output")) {
        Fields f(*output, "output");
        cfg.output.directory = f.string("directory", "ldos_out");
        if (const json* formats = f.find("formats")) {
            if (!formats->is_array() || formats->empty()) {
                f.fail("formats", "expected a non-empty list drawn from \"csv\", \"json\"");
            }
            cfg.output.csv = false;
            cfg.output.json = false;
            for (const auto& item : *formats) {
                if (item == "csv") {
                    cfg.output.csv = true;
                } else if (item == "json") {
                    cfg.output.json = true;
                } else {
                    f.fail("formats", "unknown format " + item.dump());
                }
            }
        }
        cfg.output.persist_matrices = f.boolean("persist_matrices", false);
        f.finish();
    }
    root.finish();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string canonical_config(const ExperimentConfig& cfg) {
    json hypotheses = json::array();
    for (const auto& h : cfg.analysis.hypotheses) {
        hypotheses.push_back({{"family", to_string(h.family)}, {"width", h.width ? json(*h.width) : json("predicted")}});
    }
    json formats = json::array();
    if (cfg.output.csv) {
        formats.push_back("csv");
    }
    if (cfg.output.json) {
        formats.push_back("json");
    }
    const json doc{
        {"model", model_to_json(cfg.model)},
        {"perturbation", model_to_json(cfg.perturbation)},
        {"delta", cfg.delta},
        {"circuit",
         {{"m_bins", cfg.circuit.m_bins},
          {"init", init_to_json(cfg.circuit.init)},
          {"shots", cfg.circuit.shots},
          {"seed", cfg.circuit.seed}}},
        {"analysis",
         {{"hypotheses", hypotheses},
          {"epsilon", cfg.analysis.epsilon},
          {"decision_threshold", cfg.analysis.decision_threshold},
          {"coupling_threshold", cfg.analysis.pair.coupling_threshold},
          {"mass_fraction", cfg.analysis.pair.mass_fraction},
          {"regime_c_lo", cfg.analysis.regime.lower},
          {"regime_c_hi", cfg.analysis.regime.upper}}},
        {"output",
         {{"directory", cfg.output.directory.generic_string()},
          {"formats", formats},
          {"persist_matrices", cfg.output.persist_matrices}}}};
    return doc.dump();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eni") == std::string::npos) {
        s += ".0";
    }
    return s;
}

std::string profile_csv(const LdosProfile& profile) {
    std::string out = "offset,phi,weight\n";
    for (std::size_t i = 0; i < profile.offsets.size(); ++i) {
        out += std::to_string(profile.offsets[i]) + "," + format_double(profile.phi(i)) + "," +
               format_double(profile.weights[i]) + "\n";
    }
    return out;
}

std::string kernel_csv(const RealMatrix& p, const RealMatrix* stderr_, const std::vector<bool>& emit_row) {
    std::string out = "m,l,p,stderr\n";
    for (std::size_t m = 0; m < p.rows(); ++m) {
        if (!emit_row[m]) {
            continue;
        }
        for (std::size_t l = 0; l < p.cols(); ++l) {
            out += std::to_string(m) + "," + std::to_string(l) + "," + format_double(p(m, l)) + "," +
                   format_double(stderr_ ? (*stderr_)(m, l) : 0.0) + "\n";
        }
    }
    return out;
}

std::string kernel_csv(const Kernel& kernel) {
    std::vector<bool> rows(kernel.bins);
    for (std::size_t m = 0; m < kernel.bins; ++m) {
        rows[m] = !kernel.empty(m);
    }
    return kernel_csv(kernel.conditional, nullptr, rows);
}

std::string kernel_csv(const KernelEstimate& estimate) {
    std::vector<bool> rows(estimate.bins);
    for (std::size_t m = 0; m < estimate.bins; ++m) {
        rows[m] = !estimate.empty(m);
    }
    return kernel_csv(estimate.p, &estimate.stderr_, rows);
}

std::string counts_csv(const JointCounts& counts) {
    std::string out = "m,l,count\n";
    for (std::size_t m = 0; m < counts.bins; ++m) {
        for (std::size_t l = 0; l < counts.bins; ++l) {
            out += std::to_string(m) + "," + std::to_string(l) + "," + std::to_string(counts.at(m, l)) + "\n";
        }
    }
    return out;
}

std::vector<double> read_profile_weights(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open profile " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "offset,phi,weight") {
        throw DataError(path.string() + ": expected header offset,phi,weight");
    }
    std::vector<double> weights;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto comma = line.rfind(',');
        double w = 0.0;
        const char* first = comma == std::string::npos ? nullptr : line.data() + comma + 1;
        const auto res = first ? std::from_chars(first, line.data() + line.size(), w) : std::from_chars_result{};
        if (!first || res.ec != std::errc{} || res.ptr != line.data() + line.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        weights.push_back(w);
    }
    return weights;
}

std::vector<ProfileHypothesis> resolve_hypotheses(const AnalysisConfig& analysis, double predicted, std::size_t bins) {
    const double gamma = std::max(predicted, kTwoPi / (10.0 * static_cast<double>(bins)));
    std::vector<ProfileHypothesis> out;
    for (const auto& h : analysis.hypotheses) {
        double width = 0.0;
        if (h.width) {
            width = *h.width;
        } else if (h.family == ProfileFamily::breit_wigner) {
            width = gamma;
        } else {
            width = gamma / (2.0 * std::sqrt(2.0 * std::log(2.0)));
        }
        out.push_back({h.family, width});
    }
    return out;
}

RunManifest run_experiment(ExperimentConfig cfg, const RunOptions& options) {
    if (options.oracle_only) {
        cfg.circuit.shots = 0;
    }
    if (options.seed) {
        cfg.circuit.seed = *options.seed;
    }
    if (options.out_dir) {
        cfg.output.directory = *options.out_dir;
    }

    const std::size_t bins = cfg.circuit.m_bins;
    RunManifest manifest;
    manifest.config_hash = "fnv1a64:" + hex64(fnv1a(canonical_config(cfg)));
    manifest.model_seed = cfg.model.seed;
    manifest.perturbation_seed = cfg.perturbation.seed;
    manifest.circuit_seed = cfg.circuit.seed;
    manifest.shots = cfg.circuit.shots;
    manifest.warnings = circuit_warnings(cfg.circuit, cfg.model.dimension);

    ArtifactWriter writer(cfg.output.directory);
    std::string stage;
    Stopwatch stage_clock;
    const auto begin = [&](std::string name) {
        stage = std::move(name);
        stage_clock = Stopwatch();
    };
    const auto end = [&] { manifest.timings.push_back({stage, stage_clock.seconds()}); };

    try {
        begin("models");
        UnitaryOperator u = build_unitary(cfg.model, bins);
        HermitianOperator v = build_perturbation(cfg.perturbation, bins);
        end();

        begin("spectral");
        const MapPair pair = build_map_pair(std::move(u), std::move(v), cfg.delta, cfg.analysis.pair);
        manifest.sigma = pair.sigma;
        manifest.bandwidth = pair.bandwidth;
        manifest.level_density = pair.level_density;
        manifest.predicted_gamma = predicted_gamma(pair.sigma, pair.level_density);
        manifest.regime = regime_check(pair.sigma, pair.level_density, pair.bandwidth, cfg.analysis.regime);
        end();

        std::optional<JointCounts> counts;
        if (cfg.circuit.shots > 0) {
            begin("sampling");
            const CircuitSimulator sim(pair, cfg.circuit);
            counts = accumulate(sim.sample(), bins);
            end();
        }

        begin("oracle");
        const Kernel ideal = kernel_ideal_binning(pair, bins, cfg.circuit.init);
        const Kernel faithful = kernel_circuit_faithful(pair, bins, cfg.circuit.init);
        end();

        begin("analysis");
        const auto hyps = resolve_hypotheses(cfg.analysis, manifest.predicted_gamma, bins);
        const auto p1 = discretize_profile(hyps[0], bins);
        const auto p2 = discretize_profile(hyps[1], bins);
        TestContext ctx{cfg.analysis.decision_threshold, cfg.analysis.epsilon, manifest.predicted_gamma,
                        manifest.regime};

        json fits = json::array();
        const auto add_fits = [&](std::string_view source, std::span<const double> data) {
            for (auto family : {ProfileFamily::breit_wigner, ProfileFamily::gaussian}) {
                const WidthFit fit = fit_width(data, family);
                fits.push_back({{"source", source},
                                {"family", to_string(family)},
                                {"width", fit.width},
                                {"log_likelihood", fit.log_likelihood},
                                {"degenerate", fit.degenerate}});
            }
        };
        const LdosProfile ideal_agg = aggregated_ldos(ideal);
        const LdosProfile faithful_agg = aggregated_ldos(faithful);
        add_fits("ideal", ideal_agg.weights);
        add_fits("faithful", faithful_agg.weights);

        json tests = json::array();
        std::optional<Kernel> sampled;
        if (counts) {
            const auto offsets = offset_counts(*counts);
            add_fits("sampled", offsets);
            tests.push_back(report_to_json(decide(offsets, p1, p2, ctx), "sampled"));
            sampled = empirical_kernel(*counts);
            const WidthFit fit = fit_width(offsets, hyps[0].family);
            tests.back()["fitted_width"] = fit.width;
            tests.back()["fit_degenerate"] = fit.degenerate;
        } else {
            // zero-shot: sample-size planning only, width fitted on the ideal oracle
            const std::vector<double> none(bins, 0.0);
            TestReport r = decide(none, p1, p2, ctx);
            const WidthFit fit = fit_width(ideal_agg.weights, hyps[0].family);
            r.fitted_width = fit.width;
            r.fit_degenerate = fit.degenerate;
            tests.push_back(report_to_json(r, "oracle_only"));
        }
        json hyp_json = json::array();
        for (const auto& h : hyps) {
            hyp_json.push_back({{"family", to_string(h.family)}, {"width", h.width}});
        }
        const json report{{"sigma", pair.sigma},
                          {"sigma_rho", pair.sigma * pair.level_density},
                          {"bandwidth", pair.bandwidth},
                          {"level_density", pair.level_density},
                          {"predicted_width", manifest.predicted_gamma},
                          {"regime", to_string(manifest.regime)},
                          {"hypotheses", hyp_json},
                          {"tests", tests},
                          {"fits", fits}};
        end();

        begin("write");
        writer.prepare();
        if (cfg.output.csv) {
            if (counts) {
                writer.write("joint_counts.csv", counts_csv(*counts));
                writer.write("kernel_estimate.csv", kernel_csv(estimate_kernel(*counts)));
            }
            writer.write("kernel_ideal.csv", kernel_csv(ideal));
            writer.write("kernel_faithful.csv", kernel_csv(faithful));
            const auto write_profiles = [&](const std::string& name, const Kernel& k) {
                for (std::size_t m = 0; m < bins; ++m) {
                    if (!k.empty(m)) {
                        writer.write("profiles/" + name + "_m" + std::to_string(m) + ".csv",
                                     profile_csv(ldos_from_kernel(k, m)));
                    }
                }
                writer.write("profiles/" + name + "_aggregated.csv", profile_csv(aggregated_ldos(k)));
            };
            if (sampled) {
                write_profiles("sampled", *sampled);
            }
            write_profiles("ideal", ideal);
            write_profiles("faithful", faithful);
        }
        if (cfg.output.json) {
            writer.write("report.json", report.dump(2) + "\n");
        }
        if (cfg.output.persist_matrices) {
            const json matrices{{"u", matrix_to_json(pair.u.matrix())},
                                {"v", matrix_to_json(pair.v.matrix())},
                                {"delta", pair.delta},
                                {"coupling_threshold", cfg.analysis.pair.coupling_threshold},
                                {"mass_fraction", cfg.analysis.pair.mass_fraction}};
            writer.write("matrices.json", matrices.dump() + "\n");
        }
        end();

        manifest.files = writer.written();
        writer.write("manifest.json", manifest_json(manifest, cfg));
        return manifest;
    } catch (const std::exception& e) {
        writer.remove_all();
        manifest.status = "failed";
        manifest.failed_stage = stage;
        manifest.error = e.what();
        manifest.files.clear();
        try {
            ArtifactWriter record(cfg.output.directory);
            record.write("manifest.json", manifest_json(manifest, cfg));
        } catch (const std::exception&) {
            // the output location itself is unusable; the exception below reports it
        }
        throw;
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e)) {
        return 3;
    }
    if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e)) {
        return 4;
    }
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const DataError*>(&e)) {
        return 2;
    }
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) {
        return 3;
    }
    return 1;
}

} // namespace ldos
