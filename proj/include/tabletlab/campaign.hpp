#pragma once

// Config-driven orchestration: one JSON config selects a mode, every artifact
// lands in the output directory and is listed in manifest.json.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabletlab/chemometrics.hpp"
#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/formulator.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/log.hpp"
#include "tabletlab/materials.hpp"
#include "tabletlab/mixture.hpp"
#include "tabletlab/mobo.hpp"
#include "tabletlab/pibo.hpp"
#include "tabletlab/plant.hpp"
#include "tabletlab/surrogate.hpp"

namespace tabletlab::campaign {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string>& modes() {
    static const std::vector<std::string> m{"gen-data", "train-surrogate", "formulate", "pibo",
                                            "mobo",     "manufacture",     "monitor",   "pipeline"};
    return m;
}

// ---------------------------------------------------------------- config reading

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be reported as unknown.
class ConfigReader {
public:
    ConfigReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(ErrorCode::ConfigParseError, where() + " must be an object");
    }

    bool has(const std::string& key) {
        if (!j_.contains(key)) return false;
        used_.insert(key);
        return true;
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(key);
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key) || j_.at(key).is_null()) return std::nullopt;
        return convert<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        if (!has(key)) throw Error(ErrorCode::ConfigParseError, "missing key '" + qualified(key) + "'");
        return convert<T>(key);
    }

    /// Runs `f` on the sub-object when present.
    void object(const std::string& key, const std::function<void(ConfigReader&)>& f) {
        if (!has(key)) return;
        ConfigReader sub(j_.at(key), qualified(key));
        f(sub);
        sub.finish();
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw Error(ErrorCode::ConfigParseError, "unknown key '" + qualified(k) + "'");
    }

private:
    template <class T>
    T convert(const std::string& key) {
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::ConfigParseError, "bad value for '" + qualified(key) + "'");
        }
    }

    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

struct LibrarySection {
    fs::path data_dir = "data";
    std::optional<fs::path> materials;
    std::optional<fs::path> descriptors;
    std::optional<fs::path> aspect_ratio;
    std::optional<fs::path> psd;
};

struct PlantSection {
    plant::PlantConfig config;
    bool truth_from_formulation = true;
    bool elastic_recovery = true;
    plant::TruthMap map;
    std::optional<physics::KawakitaParams> kawakita;
    std::optional<physics::RyshDuckParams> rysh_duck;
};

struct GenDataSection {
    int rows = 2000;
    plant::SamplerConfig sampler;
};

struct SurrogateSection {
    std::optional<fs::path> dataset;
    std::optional<fs::path> models;
    surrogate::TrainConfig train;
    std::vector<std::string> held_out;
};

struct MoboSection {
    bool enabled = true;
    mobo::MoboConfig config;
};

struct ManufactureSection {
    bool enabled = true;
    int tablets = 100;
    std::optional<ProcessSettings> settings;
};

struct MonitorSection {
    int spectra = 200;
    std::vector<int> outliers;
    int components = 3;
    double confidence = 0.99;
    chemo::Preprocessing preprocessing;
};

struct CampaignConfig {
    std::string mode;
    std::uint64_t seed = 0;
    fs::path output = "out";
    LibrarySection library;
    TargetProfile targets;
    std::string api = "SP";
    std::optional<Formulation> formulation;
    PlantSection plant;
    GenDataSection gen_data;
    SurrogateSection surrogate;
    formulator::FormulatorConfig formulator;
    pibo::PiboConfig pibo;
    MoboSection mobo;
    ManufactureSection manufacture;
    MonitorSection monitor;
    std::string canonical;  // normalized JSON text the hash is taken over

    std::uint64_t hash() const { return io::fnv1a(canonical); }
};

namespace detail {

inline std::string hex(std::uint64_t v) {
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << v;
    return out.str();
}

inline void read_interval(ConfigReader& r, const std::string& key, gp::Interval& out) {
    r.object(key, [&](ConfigReader& s) {
        out.lo = s.get("min", out.lo);
        out.hi = s.get("max", out.hi);
    });
}

inline ProcessSettings read_settings(ConfigReader& s, ProcessSettings d = {}) {
    d.precompression_pressure = s.get("precompression", d.precompression_pressure);
    d.main_compression_pressure = s.get("main_compression", d.main_compression_pressure);
    d.dwell_time = s.get("dwell", d.dwell_time);
    return d;
}

inline void read_gp(ConfigReader& r, gp::GpConfig& g) {
    r.object("gp", [&](ConfigReader& s) {
        g.random_starts = s.get("random_starts", g.random_starts);
        g.max_evaluations = s.get("max_evaluations", g.max_evaluations);
        g.max_noise_variance = s.get("max_noise_variance", g.max_noise_variance);
    });
}

inline Formulation read_formulation(const json& j, const std::string& path) {
    if (!j.is_array()) throw Error(ErrorCode::ConfigParseError, "'" + path + "' must be an array");
    Formulation f;
    for (const auto& c : j) {
        ConfigReader r(c, path + "[]");
        f.components.push_back({r.require<std::string>("material"), r.require<double>("fraction")});
        r.finish();
    }
    return f;
}

}  // namespace detail

inline CampaignConfig parse_config(const json& root, std::optional<std::uint64_t> seed_override = {}) {
    ConfigReader r(root, "");
    CampaignConfig c;
    c.mode = r.require<std::string>("mode");
    c.seed = seed_override ? *seed_override : r.require<std::uint64_t>("seed");
    if (seed_override) r.has("seed");
    c.output = r.get<std::string>("output", c.output.string());
    c.api = r.get("api", c.api);
    if (r.has("formulation")) c.formulation = detail::read_formulation(root.at("formulation"), "formulation");

    r.object("library", [&](ConfigReader& s) {
        c.library.data_dir = s.get<std::string>("data_dir", c.library.data_dir.string());
        if (auto v = s.optional<std::string>("materials")) c.library.materials = *v;
        if (auto v = s.optional<std::string>("descriptors")) c.library.descriptors = *v;
        if (auto v = s.optional<std::string>("aspect_ratio")) c.library.aspect_ratio = *v;
        if (auto v = s.optional<std::string>("psd")) c.library.psd = *v;
    });

    r.object("targets", [&](ConfigReader& s) {
        auto& t = c.targets;
        t.drug_loading = s.get("drug_loading", t.drug_loading);
        t.target_weight = s.get("target_weight", t.target_weight);
        t.target_porosity = s.get("target_porosity", t.target_porosity);
        t.ts_threshold = s.get("ts_threshold", t.ts_threshold);
        t.porosity_threshold = s.get("porosity_threshold", t.porosity_threshold);
        t.target_tensile_strength = s.optional<double>("target_tensile_strength");
    });

    r.object("plant", [&](ConfigReader& s) {
        auto& p = c.plant;
        p.truth_from_formulation = s.get("truth_from_formulation", p.truth_from_formulation);
        p.elastic_recovery = s.get("elastic_recovery", p.elastic_recovery);
        s.object("kawakita", [&](ConfigReader& k) {
            p.kawakita = physics::KawakitaParams{k.require<double>("eps0"), k.require<double>("B")};
        });
        s.object("rysh_duck", [&](ConfigReader& k) {
            p.rysh_duck = physics::RyshDuckParams{k.require<double>("T_hat"), k.require<double>("k_b")};
        });
        s.object("elastic", [&](ConfigReader& e) {
            auto& m = p.map.elastic;
            m.c0 = e.get("c0", m.c0);
            m.c1 = e.get("c1", m.c1);
            m.c2 = e.get("c2", m.c2);
            m.tau = e.get("tau", m.tau);
            m.c3 = e.get("c3", m.c3);
            m.lo = e.get("min", m.lo);
            m.hi = e.get("max", m.hi);
        });
        p.config.truth.true_density = s.get("true_density", p.config.truth.true_density);
        s.object("noise", [&](ConfigReader& n) {
            auto& z = p.config.noise;
            if (!n.get("enabled", true)) z = plant::NoiseConfig::off();
            z.dose_rel_std = n.get("dose_rel_std", z.dose_rel_std);
            z.porosity_std = n.get("porosity_std", z.porosity_std);
            z.force_rel_std = n.get("force_rel_std", z.force_rel_std);
            z.spectral_std = n.get("spectral_std", z.spectral_std);
            z.scatter_std = n.get("scatter_std", z.scatter_std);
            z.baseline_std = n.get("baseline_std", z.baseline_std);
        });
        s.object("loss", [&](ConfigReader& l) {
            p.config.loss.lo = l.get("min", p.config.loss.lo);
            p.config.loss.hi = l.get("max", p.config.loss.hi);
        });
        p.config.d1_tolerance = s.get("d1_tolerance", p.config.d1_tolerance);
        p.config.d2_tolerance = s.get("d2_tolerance", p.config.d2_tolerance);
        p.config.seconds_per_tablet = s.get("seconds_per_tablet", p.config.seconds_per_tablet);
        p.config.destructive_every = s.get("destructive_every", p.config.destructive_every);
        p.config.d1_max_attempts = s.get("d1_max_attempts", p.config.d1_max_attempts);
        p.config.dose_target = s.optional<double>("dose_target");
    });

    r.object("gen_data", [&](ConfigReader& s) {
        auto& g = c.gen_data;
        g.rows = s.get("rows", g.rows);
        g.sampler.apis = s.get("apis", g.sampler.apis);
        g.sampler.fillers = s.get("fillers", g.sampler.fillers);
        g.sampler.placebo_fraction = s.get("placebo_fraction", g.sampler.placebo_fraction);
        g.sampler.min_loading = s.get("min_loading", g.sampler.min_loading);
        g.sampler.max_loading = s.get("max_loading", g.sampler.max_loading);
        g.sampler.min_pressure = s.get("min_pressure", g.sampler.min_pressure);
        g.sampler.max_pressure = s.get("max_pressure", g.sampler.max_pressure);
        g.sampler.porosity_noise = s.get("porosity_noise", g.sampler.porosity_noise);
        g.sampler.ts_log_noise = s.get("ts_log_noise", g.sampler.ts_log_noise);
    });

    r.object("surrogate", [&](ConfigReader& s) {
        auto& g = c.surrogate;
        if (auto v = s.optional<std::string>("dataset")) g.dataset = *v;
        if (auto v = s.optional<std::string>("models")) g.models = *v;
        g.train.ensemble_size = s.get("ensemble_size", g.train.ensemble_size);
        g.train.hidden = s.get("hidden", g.train.hidden);
        g.train.epochs = s.get("epochs", g.train.epochs);
        g.train.batch_size = s.get("batch_size", g.train.batch_size);
        g.train.learning_rate = s.get("learning_rate", g.train.learning_rate);
        g.held_out = s.get("held_out_apis", g.held_out);
    });

    r.object("formulator", [&](ConfigReader& s) {
        auto& f = c.formulator;
        f.excipients = s.get("excipients", f.excipients);
        f.min_pressure = s.get("min_pressure", f.min_pressure);
        f.max_pressure = s.get("max_pressure", f.max_pressure);
        f.population = s.get("population", f.population);
        f.generations = s.get("generations", f.generations);
        f.split_step = s.optional<double>("split_step");
        f.pressure_step = s.optional<double>("pressure_step");
        f.constraints.theta_sigma = s.get("theta_sigma", f.constraints.theta_sigma);
        f.constraints.theta_eps = s.get("theta_eps", f.constraints.theta_eps);
        f.constraints.alpha = s.get("alpha", f.constraints.alpha);
        f.constraints.beta = s.get("beta", f.constraints.beta);
    });

    r.object("pibo", [&](ConfigReader& s) {
        auto& p = c.pibo;
        p.min_pressure = s.get("min_pressure", p.min_pressure);
        p.max_pressure = s.get("max_pressure", p.max_pressure);
        p.precompression_pressure = s.get("precompression", p.precompression_pressure);
        p.dwell_time = s.get("dwell", p.dwell_time);
        p.replicates = s.get("replicates", p.replicates);
        p.max_iterations = s.get("max_iterations", p.max_iterations);
        p.termination_threshold = s.get("termination_threshold", p.termination_threshold);
        p.candidates = s.get("candidates", p.candidates);
        detail::read_gp(s, p.gp);
    });

    r.object("mobo", [&](ConfigReader& s) {
        auto& m = c.mobo;
        m.enabled = s.get("enabled", m.enabled);
        detail::read_interval(s, "precompression", m.config.precompression);
        detail::read_interval(s, "main_compression", m.config.main_compression);
        detail::read_interval(s, "dwell", m.config.dwell);
        m.config.lhs_points = s.get("lhs_points", m.config.lhs_points);
        m.config.iterations = s.get("iterations", m.config.iterations);
        m.config.replicates = s.get("replicates", m.config.replicates);
        m.config.acquisition_resolution = s.get("acquisition_resolution", m.config.acquisition_resolution);
        m.config.dwell_slices = s.get("dwell_slices", m.config.dwell_slices);
        m.config.grid_resolution = s.get("grid_resolution", m.config.grid_resolution);
        detail::read_gp(s, m.config.gp);
    });

    r.object("manufacture", [&](ConfigReader& s) {
        auto& m = c.manufacture;
        m.enabled = s.get("enabled", m.enabled);
        m.tablets = s.get("tablets", m.tablets);
        s.object("settings", [&](ConfigReader& p) { m.settings = detail::read_settings(p); });
    });

    r.object("monitor", [&](ConfigReader& s) {
        auto& m = c.monitor;
        m.spectra = s.get("spectra", m.spectra);
        m.outliers = s.get("outliers", m.outliers);
        m.components = s.get("components", m.components);
        m.confidence = s.get("confidence", m.confidence);
        s.object("preprocessing", [&](ConfigReader& p) {
            auto& q = m.preprocessing;
            q.trim_lo = p.get("trim_min", q.trim_lo);
            q.trim_hi = p.get("trim_max", q.trim_hi);
            q.sg_window = p.get("window", q.sg_window);
            q.sg_polyorder = p.get("polyorder", q.sg_polyorder);
            q.sg_deriv = p.get("deriv", q.sg_deriv);
        });
    });
    r.finish();

    if (std::find(modes().begin(), modes().end(), c.mode) == modes().end())
        throw Error(ErrorCode::UnknownMode, "unknown mode '" + c.mode + "'");
    c.plant.config.targets = c.targets;
    c.pibo.target_porosity = c.targets.target_porosity;
    c.formulator.constraints.theta_sigma = root.contains("formulator") && root["formulator"].contains("theta_sigma")
                                               ? c.formulator.constraints.theta_sigma
                                               : c.targets.ts_threshold;
    c.formulator.constraints.theta_eps = root.contains("formulator") && root["formulator"].contains("theta_eps")
                                             ? c.formulator.constraints.theta_eps
                                             : c.targets.porosity_threshold;
    c.mobo.config.ts_threshold = c.targets.ts_threshold;
    c.mobo.config.porosity_threshold = c.targets.porosity_threshold;

    json canonical = root;
    canonical["seed"] = c.seed;
    c.canonical = canonical.dump();
    return c;
}

inline CampaignConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed_override = {}) {
    json root;
    try {
        root = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigParseError, path.string() + ": " + e.what());
    }
    return parse_config(root, seed_override);
}

// ---------------------------------------------------------------- artifacts

/// Writes files under one directory and records each in the manifest.
class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    const fs::path& dir() const { return dir_; }

    fs::path write(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        io::write_file(path, content);
        files_[name] = content;
        return path;
    }

    fs::path write_json(const std::string& name, const json& j) { return write(name, j.dump(2) + "\n"); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : files_) out.push_back(k);
        return out;
    }

    void write_manifest(const CampaignConfig& c) {
        json files = json::array();
        for (const auto& [name, content] : files_)
            files.push_back({{"path", name}, {"bytes", content.size()}, {"fnv1a", detail::hex(io::fnv1a(content))}});
        const json m{{"mode", c.mode}, {"seed", c.seed}, {"config_hash", detail::hex(c.hash())}, {"files", files}};
        io::write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    }

private:
    fs::path dir_;
    std::map<std::string, std::string> files_;
};

// ---------------------------------------------------------------- stages

/// Independent per-stage seed streams derived from the campaign seed.
inline std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
    std::uint64_t z = seed + stage * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum Stage : std::uint64_t { GenData = 1, Train, Formulate, PiboPlant, MoboPlant, MoboDesign, ManufacturePlant, MonitorPlant };

inline MaterialLibrary load_library(const LibrarySection& s) {
    LibraryPaths p{s.materials.value_or(s.data_dir / "materials.csv"), s.descriptors.value_or(s.data_dir / "descriptors.csv"),
                   s.aspect_ratio.value_or(s.data_dir / "aspect_ratio.csv"), s.psd.value_or(fs::path{})};
    for (const auto* f : {&p.materials, &p.descriptors, &p.aspect_ratio, &p.psd})
        if (!f->empty() && !fs::exists(*f)) throw Error(ErrorCode::IoError, "missing library file " + f->string());
    return tabletlab::load_library(p);
}

struct Context {
    const CampaignConfig& config;
    mixture::MixtureModel model;
    ArtifactWriter& out;
    json report = json::object();
};

inline json base_report(const CampaignConfig& c) {
    return {{"mode", c.mode}, {"seed", c.seed}, {"config_hash", detail::hex(c.hash())}};
}

inline surrogate::Dataset generate_dataset(Context& ctx) {
    const auto& c = ctx.config;
    auto data = plant::generate_training_set(ctx.model, c.gen_data.sampler, c.gen_data.rows,
                                             stage_seed(c.seed, GenData), c.plant.map);
    ctx.out.write("dataset.csv", surrogate::dataset_to_csv(data));
    return data;
}

inline surrogate::SurrogateModels obtain_models(Context& ctx) {
    const auto& c = ctx.config;
    if (c.surrogate.models) {
        return {surrogate::load(*c.surrogate.models / "porosity.model"),
                surrogate::load(*c.surrogate.models / "tensile_strength.model")};
    }
    const auto data = c.surrogate.dataset ? surrogate::dataset_from_csv(*c.surrogate.dataset) : generate_dataset(ctx);
    auto cfg = c.surrogate.train;
    cfg.seed_offset = stage_seed(c.seed, Train);
    json metrics;
    if (!c.surrogate.held_out.empty()) {
        const auto m = surrogate::evaluate_leave_api_out(data, c.surrogate.held_out, cfg);
        metrics["held_out"] = {{"apis", c.surrogate.held_out},
                               {"rows", m.rows},
                               {"r2_porosity", m.r2_porosity},
                               {"rmse_porosity", m.rmse_porosity},
                               {"r2_tensile_strength", m.r2_tensile_strength},
                               {"rmse_tensile_strength", m.rmse_tensile_strength}};
    }
    auto models = surrogate::train_surrogates(data, cfg);
    const auto fit = surrogate::evaluate(models, data);
    metrics["training"] = {{"rows", fit.rows},
                           {"r2_porosity", fit.r2_porosity},
                           {"rmse_porosity", fit.rmse_porosity},
                           {"r2_tensile_strength", fit.r2_tensile_strength},
                           {"rmse_tensile_strength", fit.rmse_tensile_strength}};
    ctx.out.write("models/porosity.model", surrogate::serialize(models.porosity));
    ctx.out.write("models/tensile_strength.model", surrogate::serialize(models.tensile_strength));
    ctx.report["surrogate"] = metrics;
    return models;
}

struct FormulateOutcome {
    Formulation formulation;
    double pressure = 0.0;
    bool feasible = false;
};

inline FormulateOutcome stage_formulate(Context& ctx, const surrogate::SurrogateModels& models) {
    const auto& c = ctx.config;
    formulator::Evaluator ev(ctx.model, formulator::ensemble_predictor(models), c.api, c.targets.drug_loading, c.formulator);
    const auto r = formulator::run_nsga2(ev, stage_seed(c.seed, Formulate));
    std::string csv = formulator::result_csv_header();
    for (const auto& s : r.solutions) csv += formulator::result_csv_row(s, ev);
    ctx.out.write("formulation.csv", csv);
    const auto& best = r.best();
    json comps = json::array();
    for (const auto& comp : best.formulation.components) comps.push_back({{"material", comp.material_id}, {"fraction", comp.fraction}});
    ctx.report["formulate"] = {{"feasible", r.feasible},
                               {"evaluations", r.evaluations},
                               {"solutions", r.solutions.size()},
                               {"formulation", comps},
                               {"ffc", best.ffc},
                               {"pressure", best.genome.pressure},
                               {"porosity", {{"mean", best.porosity.mean}, {"std", best.porosity.std}}},
                               {"tensile_strength", {{"mean", best.tensile_strength.mean}, {"std", best.tensile_strength.std}}},
                               {"g1", best.constraints.g1},
                               {"g2", best.constraints.g2}};
    if (!r.feasible) log().warn("formulate: no feasible formulation, reporting the least-violating one");
    return {best.formulation, best.genome.pressure, r.feasible};
}

inline plant::PlantConfig plant_config(const Context& ctx, const Formulation& f, Stage stage) {
    const auto& c = ctx.config;
    auto pc = c.plant.config;
    if (c.plant.truth_from_formulation) {
        pc.truth = plant::ground_truth(f, ctx.model, c.plant.map);
    }
    pc.truth.elastic = c.plant.elastic_recovery ? c.plant.map.elastic : plant::ElasticRecoveryModel::none();
    if (c.plant.kawakita) pc.truth.kawakita = *c.plant.kawakita;
    if (c.plant.rysh_duck) pc.truth.rysh_duck = *c.plant.rysh_duck;
    pc.seed = stage_seed(c.seed, stage);
    return pc;
}

inline json plant_usage(const plant::Plant& p) {
    return {{"tablets", p.iterations()},
            {"simulated_seconds", p.clock()},
            {"powder_consumed_mg", p.powder_consumed()},
            {"powder_lost_mg", p.powder_lost()}};
}

inline pibo::PiboReport stage_pibo(Context& ctx, const Formulation& f) {
    const auto& c = ctx.config;
    plant::Plant p(plant_config(ctx, f, PiboPlant), f);
    auto r = pibo::run_pibo(p, c.pibo);
    auto j = pibo::to_json(r);
    j["plant"] = plant_usage(p);
    ctx.report["pibo"] = j;
    if (r.final_parameters) ctx.out.write("pibo_curves.csv", pibo::curves_csv(*r.final_parameters, c.pibo.min_pressure, c.pibo.max_pressure));
    ctx.out.write("pibo_log.jsonl", p.log().to_jsonl());
    return r;
}

inline std::optional<mobo::OperatingPoint> stage_mobo(Context& ctx, const Formulation& f) {
    const auto& c = ctx.config;
    plant::Plant p(plant_config(ctx, f, MoboPlant), f);
    auto mc = c.mobo.config;
    mc.seed = stage_seed(c.seed, MoboDesign);
    const auto r = mobo::run_mobo(p, mc);
    ctx.out.write("mobo_observations.csv", mobo::observations_csv(r.state));
    ctx.out.write("mobo_log.jsonl", p.log().to_jsonl());
    json j{{"lhs_experiments", r.lhs_experiments}, {"explore_experiments", r.explore_experiments}, {"plant", plant_usage(p)}};
    std::optional<mobo::OperatingPoint> op;
    if (r.state.fitted()) {
        const auto grids = mobo::predict_grid(r.state, mc.dwell_slices, mc.grid_resolution);
        const auto masks = mobo::feasible_region(grids, {mc.ts_threshold, mc.porosity_threshold});
        for (std::size_t k = 0; k < grids.size(); ++k) {
            const auto tag = "_dwell" + io::fmt(grids[k].dwell) + ".csv";
            ctx.out.write("mobo_elastic_recovery" + tag, mobo::grid_csv(grids[k], grids[k].elastic_recovery));
            ctx.out.write("mobo_porosity" + tag, mobo::grid_csv(grids[k], grids[k].porosity));
            ctx.out.write("mobo_tensile_strength" + tag, mobo::grid_csv(grids[k], grids[k].tensile_strength));
            ctx.out.write("mobo_feasible" + tag, mobo::mask_csv(grids[k], masks[k]));
        }
        try {
            op = mobo::select_operating_point(grids, masks);
            j["operating_point"] = mobo::to_json(*op);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::EmptyFeasibleRegion) throw;
            j["operating_point"] = nullptr;
            log().warn("mobo: {}", e.what());
        }
    }
    ctx.report["mobo"] = j;
    return op;
}

inline plant::ManufactureSummary stage_manufacture(Context& ctx, const Formulation& f, const ProcessSettings& s) {
    const auto& c = ctx.config;
    plant::Plant p(plant_config(ctx, f, ManufacturePlant), f);
    const auto m = p.manufacture(s, c.manufacture.tablets);
    ctx.out.write("manufacture_log.jsonl", p.log().to_jsonl());
    ctx.report["manufacture"] = {{"settings",
                                  {{"precompression", s.precompression_pressure},
                                   {"main_compression", s.main_compression_pressure},
                                   {"dwell", s.dwell_time}}},
                                 {"summary", plant::to_json(m)}};
    return m;
}

inline void stage_monitor(Context& ctx, const Formulation& f) {
    const auto& c = ctx.config;
    const auto& m = c.monitor;
    plant::Plant p(plant_config(ctx, f, MonitorPlant), f);
    const std::set<int> outliers(m.outliers.begin(), m.outliers.end());
    const ProcessSettings s = c.manufacture.settings.value_or(
        ProcessSettings{c.pibo.precompression_pressure, 150.0, c.pibo.dwell_time});
    std::vector<chemo::Spectrum> spectra;
    for (int i = 0; i < m.spectra; ++i) {
        const auto r = p.run_iteration(s, false, outliers.count(i) > 0);
        if (!r.failed) spectra.push_back(r.spectrum);
    }
    const auto res = chemo::monitor_spectra(spectra, m.preprocessing, m.components, m.confidence);
    ctx.out.write("t2_chart.csv", chemo::t2_chart_csv(spectra, res));
    ctx.out.write("spectra.jsonl", chemo::spectra_to_jsonl(spectra));
    json flagged = json::array();
    for (std::size_t i = 0; i < res.outlier.size(); ++i)
        if (res.outlier[i]) flagged.push_back(spectra[i].iteration);
    ctx.report["monitor"] = {{"spectra", spectra.size()},
                             {"components", res.pca.k},
                             {"limit", res.limit},
                             {"flagged_iterations", flagged},
                             {"injected_iterations", m.outliers}};
}

inline const Formulation& require_formulation(const CampaignConfig& c) {
    if (!c.formulation) throw Error(ErrorCode::ConfigParseError, "mode '" + c.mode + "' needs a 'formulation'");
    return *c.formulation;
}

inline ProcessSettings default_settings(const CampaignConfig& c) {
    return {c.pibo.precompression_pressure, 150.0, c.pibo.dwell_time};
}

/// formulate -> pibo -> (mobo) -> (manufacture), threading the formulation and
/// the validated settings forward.
inline void full_pipeline(Context& ctx) {
    const auto& c = ctx.config;
    Formulation f;
    if (c.formulation) {
        f = *c.formulation;
    } else {
        const auto models = obtain_models(ctx);
        f = stage_formulate(ctx, models).formulation;
    }
    const auto pr = stage_pibo(ctx, f);
    ProcessSettings settings = default_settings(c);
    if (pr.validation) settings.main_compression_pressure = pr.validation->pressure;
    int experiments = pr.experiments + (pr.validation ? 1 : 0);
    double seconds = ctx.report["pibo"]["plant"]["simulated_seconds"].get<double>();
    double consumed = ctx.report["pibo"]["plant"]["powder_consumed_mg"].get<double>();
    double lost = ctx.report["pibo"]["plant"]["powder_lost_mg"].get<double>();
    if (c.mobo.enabled) {
        if (const auto op = stage_mobo(ctx, f)) settings = op->settings;
        const auto& j = ctx.report["mobo"];
        experiments += j["lhs_experiments"].get<int>() + j["explore_experiments"].get<int>();
        seconds += j["plant"]["simulated_seconds"].get<double>();
        consumed += j["plant"]["powder_consumed_mg"].get<double>();
        lost += j["plant"]["powder_lost_mg"].get<double>();
    }
    json development{{"experiments", experiments},
                     {"simulated_seconds", seconds},
                     {"simulated_hours", seconds / 3600.0},
                     {"powder_consumed_mg", consumed},
                     {"powder_lost_mg", lost}};
    ctx.report["development"] = development;
    if (c.manufacture.enabled) {
        const auto m = stage_manufacture(ctx, f, c.manufacture.settings.value_or(settings));
        ctx.report["batch"] = {{"tablets", m.produced},
                               {"simulated_seconds", m.simulated_seconds},
                               {"simulated_hours", m.simulated_seconds / 3600.0},
                               {"powder_consumed_mg", m.powder_consumed_mg},
                               {"powder_lost_mg", m.powder_lost_mg}};
    }
}

/// Runs the configured mode; returns the report that was also written to
/// `<mode>.json`.
inline json run(const CampaignConfig& c, const fs::path& output) {
    ArtifactWriter out(output);
    Context ctx{c, mixture::MixtureModel::fit(load_library(c.library)), out, base_report(c)};
    if (c.formulation) validate_formulation(*c.formulation, ctx.model.library);

    if (c.mode == "gen-data") {
        const auto d = generate_dataset(ctx);
        ctx.report["rows"] = d.rows();
    } else if (c.mode == "train-surrogate") {
        obtain_models(ctx);
    } else if (c.mode == "formulate") {
        stage_formulate(ctx, obtain_models(ctx));
    } else if (c.mode == "pibo") {
        stage_pibo(ctx, require_formulation(c));
    } else if (c.mode == "mobo") {
        stage_mobo(ctx, require_formulation(c));
    } else if (c.mode == "manufacture") {
        stage_manufacture(ctx, require_formulation(c), c.manufacture.settings.value_or(default_settings(c)));
    } else if (c.mode == "monitor") {
        stage_monitor(ctx, require_formulation(c));
    } else if (c.mode == "pipeline") {
        full_pipeline(ctx);
    } else {
        throw Error(ErrorCode::UnknownMode, "unknown mode '" + c.mode + "'");
    }
    out.write_json(c.mode + ".json", ctx.report);
    out.write_manifest(c);
    return ctx.report;
}

inline json run(const CampaignConfig& c) { return run(c, c.output); }

/// Process exit status for a failure: 2 for a bad config, 1 otherwise.
inline int exit_code(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigParseError:
        case ErrorCode::UnknownMode:
        case ErrorCode::ParseError:
            return 2;
        default:
            return 1;
    }
}

}  // namespace tabletlab::campaign
