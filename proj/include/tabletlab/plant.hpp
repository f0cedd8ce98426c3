#pragma once

// Virtual tableting plant: dosing, D1 gate, NIR acquisition, compaction,
// testing, D2 gate and batch manufacture on a simulated clock. Also produces
// synthetic training data for the surrogate models.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tabletlab/chemometrics.hpp"
#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/materials.hpp"
#include "tabletlab/mixture.hpp"
#include "tabletlab/physics.hpp"
#include "tabletlab/surrogate.hpp"

namespace tabletlab::plant {

using Eigen::VectorXd;
using nlohmann::json;

/// ER = c0 + c1 P_main - c2 ln(1 + dwell / tau) - c3 P_pre, clamped.
struct ElasticRecoveryModel {
    double c0 = 0.02;
    double c1 = 2e-4;   // 1/MPa
    double c2 = 0.01;
    double tau = 50.0;  // ms
    double c3 = 1e-4;   // 1/MPa
    double lo = 0.0;
    double hi = 0.2;

    static ElasticRecoveryModel none() { return {0.0, 0.0, 0.0, 50.0, 0.0, 0.0, 0.0}; }

    double operator()(const ProcessSettings& s) const {
        const double er = c0 + c1 * s.main_compression_pressure - c2 * std::log1p(s.dwell_time / tau) -
                          c3 * s.precompression_pressure;
        return std::clamp(er, lo, hi);
    }
};

struct GroundTruth {
    physics::KawakitaParams kawakita{0.45, 0.02};
    physics::RyshDuckParams rysh_duck{10.0, 10.0};
    ElasticRecoveryModel elastic;
    double true_density = 1.5;  // mg/mm^3
};

struct NoiseConfig {
    double dose_rel_std = 0.01;
    double porosity_std = 0.003;
    double force_rel_std = 0.02;
    double spectral_std = 0.002;
    double scatter_std = 0.03;   // multiplicative
    double baseline_std = 0.01;  // offset and slope per 1000 nm

    static NoiseConfig off() { return {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }
};

struct LossRange {
    double lo = 10.0;  // mg
    double hi = 22.0;
    double mid() const { return 0.5 * (lo + hi); }
};

struct SpectralConfig {
    std::vector<double> grid = chemo::default_nir_grid();
    double outlier_center = 1250.0;  // nm
    double outlier_width = 15.0;     // nm, Gaussian sigma
    double outlier_factor = 8.0;     // peak height in units of spectral noise std
};

using PureSpectra = std::map<std::string, VectorXd>;

struct PlantConfig {
    GroundTruth truth;
    NoiseConfig noise;
    LossRange loss;
    double d1_tolerance = 0.05;
    double d2_tolerance = 0.05;
    double seconds_per_tablet = 50.0;
    int destructive_every = 5;
    int d1_max_attempts = 3;
    TargetProfile targets;
    // Dose aimed at; defaults to target weight plus the mean expected loss.
    std::optional<double> dose_target;
    SpectralConfig spectral;
    PureSpectra pure_spectra;
    std::uint64_t seed = 0;

    double effective_dose_target() const { return dose_target.value_or(targets.target_weight + loss.mid()); }
};

inline void validate(const PlantConfig& c) {
    if (c.loss.lo < 0.0 || c.loss.hi < c.loss.lo)
        throw Error(ErrorCode::InvalidBounds, "loss range [" + io::fmt(c.loss.lo) + ", " + io::fmt(c.loss.hi) + "]");
    for (double tol : {c.d1_tolerance, c.d2_tolerance})
        if (!(tol > 0.0 && tol < 1.0)) throw Error(ErrorCode::InvalidBounds, "gate tolerance " + io::fmt(tol));
    if (!(c.seconds_per_tablet > 0.0)) throw Error(ErrorCode::InvalidBounds, "seconds_per_tablet must be > 0");
    if (c.destructive_every < 1 || c.d1_max_attempts < 1)
        throw Error(ErrorCode::InvalidBounds, "destructive cadence and D1 attempts must be >= 1");
}

using Rng = std::mt19937_64;

// ---------------------------------------------------------------- dosing and gates

struct Dose {
    double measured = 0.0;  // mg dispensed
    double loss = 0.0;      // mg lost between dosing and the die
};

inline Dose dose_powder(double target, const PlantConfig& cfg, Rng& rng) {
    if (!(target > cfg.loss.hi))
        throw Error(ErrorCode::TargetBelowLoss, "dose " + io::fmt(target) + " mg <= max loss " + io::fmt(cfg.loss.hi));
    Dose d;
    double z = 0.0;
    if (cfg.noise.dose_rel_std > 0.0) z = std::normal_distribution<double>(0.0, cfg.noise.dose_rel_std)(rng);
    d.measured = target * (1.0 + z);
    d.loss = cfg.loss.hi > cfg.loss.lo ? std::uniform_real_distribution<double>(cfg.loss.lo, cfg.loss.hi)(rng)
                                       : cfg.loss.lo;
    return d;
}

inline bool within_band(double measured, double target, double tol) {
    return std::abs(measured - target) <= tol * std::abs(target);
}

inline GateVerdict gate_d1(double measured, double target, double tol) {
    return within_band(measured, target, tol) ? GateVerdict::Accepted : GateVerdict::Rejected;
}

inline GateVerdict gate_d2(const TabletRecord& t, const TargetProfile& targets, double tol) {
    bool ok = within_band(t.weight, targets.target_weight, tol) && within_band(t.porosity, targets.target_porosity, tol);
    if (t.tensile_strength && targets.target_tensile_strength)
        ok = ok && within_band(*t.tensile_strength, *targets.target_tensile_strength, tol);
    return ok ? GateVerdict::Accepted : GateVerdict::Rejected;
}

// ---------------------------------------------------------------- spectra

/// Deterministic synthetic pure-component spectrum: a few Gaussian bands whose
/// positions, widths and heights are seeded by the material id.
inline VectorXd pure_spectrum(const std::string& id, const std::vector<double>& grid) {
    Rng rng(io::fnv1a(id));
    std::uniform_real_distribution<double> centre(950.0, 1650.0), width(20.0, 70.0), height(0.1, 0.6);
    std::uniform_int_distribution<int> bands(4, 7);
    VectorXd s = VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), 0.3);
    const int nb = bands(rng);
    for (int b = 0; b < nb; ++b) {
        const double c = centre(rng), w = width(rng), h = height(rng);
        for (std::size_t i = 0; i < grid.size(); ++i)
            s(static_cast<Eigen::Index>(i)) += h * std::exp(-0.5 * std::pow((grid[i] - c) / w, 2));
    }
    return s;
}

inline PureSpectra pure_spectra_for(const Formulation& f, const std::vector<double>& grid) {
    PureSpectra p;
    for (const auto& c : f.components) p.emplace(c.material_id, pure_spectrum(c.material_id, grid));
    return p;
}

/// Mass-fraction mixture of pure spectra with multiplicative scatter, a linear
/// baseline and white noise. An outlier adds a narrow band at the configured
/// location.
inline chemo::Spectrum synth_spectrum(const Formulation& f, const PlantConfig& cfg, Rng& rng, bool outlier) {
    const auto& grid = cfg.spectral.grid;
    const auto n = static_cast<Eigen::Index>(grid.size());
    VectorXd a = VectorXd::Zero(n);
    for (const auto& c : f.components) {
        const auto it = cfg.pure_spectra.find(c.material_id);
        if (it == cfg.pure_spectra.end())
            throw Error(ErrorCode::MissingPureSpectrum, "no pure spectrum for " + c.material_id);
        if (it->second.size() != n) throw Error(ErrorCode::GridMismatch, "pure spectrum of " + c.material_id);
        a += c.fraction * it->second;
    }
    const auto& nz = cfg.noise;
    auto gauss = [&](double sd) { return sd > 0.0 ? std::normal_distribution<double>(0.0, sd)(rng) : 0.0; };
    const double scale = 1.0 + gauss(nz.scatter_std);
    const double offset = gauss(nz.baseline_std);
    const double slope = gauss(nz.baseline_std);
    const double mid = 0.5 * (grid.front() + grid.back());
    chemo::Spectrum s;
    s.wavelengths = grid;
    s.absorbances.resize(grid.size());
    const double bump = cfg.spectral.outlier_factor * (nz.spectral_std > 0.0 ? nz.spectral_std : 1e-3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = grid[static_cast<std::size_t>(i)];
        double v = scale * a(i) + offset + slope * (w - mid) / 1000.0 + gauss(nz.spectral_std);
        if (outlier) v += bump * std::exp(-0.5 * std::pow((w - cfg.spectral.outlier_center) / cfg.spectral.outlier_width, 2));
        s.absorbances[static_cast<std::size_t>(i)] = v;
    }
    return s;
}

// ---------------------------------------------------------------- compaction and testing

/// Compacts `mass` mg in the 9 mm die. Porosity out of the die follows from
/// axial swelling: 1 - (1 - eps_in) / (1 + ER).
inline TabletRecord compress_tablet(double mass, const ProcessSettings& s, const GroundTruth& truth,
                                    const PlantConfig& cfg, Rng& rng) {
    if (!(mass > 0.0)) throw Error(ErrorCode::NonPositiveMass, "tablet mass " + io::fmt(mass));
    TabletRecord t;
    t.weight = mass;
    t.diameter = kDieDiameter;
    const double eps_in = physics::kawakita_porosity(s.main_compression_pressure, truth.kawakita);
    const double er = truth.elastic(s);
    const double eps_out = 1.0 - (1.0 - eps_in) / (1.0 + er);
    t.in_die_thickness = tablet_thickness(mass, kDieDiameter, truth.true_density, eps_in);
    t.thickness = t.in_die_thickness * (1.0 + er);
    t.elastic_recovery = er;
    t.failed = !(s.main_compression_pressure > 0.0);
    const double noise = cfg.noise.porosity_std > 0.0 ? std::normal_distribution<double>(0.0, cfg.noise.porosity_std)(rng) : 0.0;
    t.porosity = eps_out + noise;
    return t;
}

/// Strength the tablet would show in a noiseless diametral test.
inline double true_tensile_strength(const TabletRecord& t, const GroundTruth& truth) {
    const double eps_out = 1.0 - t.weight / (truth.true_density * cylinder_volume(t.diameter, t.thickness));
    return physics::rd_tensile_strength(std::clamp(eps_out, 0.0, 1.0 - 1e-12), truth.rysh_duck);
}

struct Response {
    double elastic_recovery = 0.0;
    double porosity = 0.0;          // out of die
    double tensile_strength = 0.0;  // MPa
};

/// What a noiseless tablet pressed at `s` would measure.
inline Response noiseless_response(const ProcessSettings& s, const GroundTruth& truth) {
    Response r;
    r.elastic_recovery = truth.elastic(s);
    const double eps_in = physics::kawakita_porosity(s.main_compression_pressure, truth.kawakita);
    r.porosity = 1.0 - (1.0 - eps_in) / (1.0 + r.elastic_recovery);
    r.tensile_strength = physics::rd_tensile_strength(std::clamp(r.porosity, 0.0, 1.0 - 1e-12), truth.rysh_duck);
    return r;
}

inline TabletRecord test_tablet(TabletRecord t, bool destructive, const GroundTruth& truth, const PlantConfig& cfg,
                                Rng& rng) {
    if (!destructive) return t;
    const double sigma = t.failed ? 0.0 : true_tensile_strength(t, truth);
    double force = breaking_force_for_strength(sigma, t.diameter, t.thickness);
    if (cfg.noise.force_rel_std > 0.0) force *= 1.0 + std::normal_distribution<double>(0.0, cfg.noise.force_rel_std)(rng);
    t.breaking_force = std::max(0.0, force);
    t.tensile_strength = diametral_tensile_strength(*t.breaking_force, t.diameter, t.thickness);
    t.destroyed = true;
    return t;
}

// ---------------------------------------------------------------- campaign log

struct Event {
    double time = 0.0;  // simulated seconds
    int iteration = 0;
    std::string kind;
    json payload;
};

struct CampaignLog {
    std::vector<Event> events;

    void add(double time, int iteration, std::string kind, json payload = json::object()) {
        events.push_back({time, iteration, std::move(kind), std::move(payload)});
    }

    std::string to_jsonl() const {
        std::string out;
        for (const auto& e : events) {
            json j = e.payload;
            j["t"] = e.time;
            j["iteration"] = e.iteration;
            j["event"] = e.kind;
            out += j.dump() + "\n";
        }
        return out;
    }
};

inline json to_json(const TabletRecord& t) {
    json j{{"weight", t.weight},
           {"diameter", t.diameter},
           {"thickness", t.thickness},
           {"porosity", t.porosity},
           {"elastic_recovery", t.elastic_recovery},
           {"d1", to_string(t.d1_verdict)},
           {"d2", to_string(t.d2_verdict)},
           {"destroyed", t.destroyed},
           {"failed", t.failed}};
    if (t.breaking_force) j["breaking_force"] = *t.breaking_force;
    if (t.tensile_strength) j["tensile_strength"] = *t.tensile_strength;
    return j;
}

// ---------------------------------------------------------------- plant

struct IterationResult {
    TabletRecord tablet;
    chemo::Spectrum spectrum;
    Dose dose;
    int d1_attempts = 0;
    bool failed = false;  // D1 retries exhausted
};

/// Replicate-averaged outcome of one experiment at fixed settings.
struct Observation {
    ProcessSettings settings;
    double porosity = 0.0;
    double tensile_strength = 0.0;
    double elastic_recovery = 0.0;
    int replicates = 0;
};

struct ManufactureSummary {
    int requested = 0;
    int produced = 0;
    int d1_rejections = 0;
    int failed_iterations = 0;
    int d2_accepted = 0;
    int d2_rejected = 0;
    int destroyed = 0;
    double mean_weight = 0.0;
    double weight_rsd = 0.0;  // relative std of tablet weights
    double mean_weight_deviation = 0.0;    // |mean - target| / target
    double mean_porosity_deviation = 0.0;  // |mean - target| / target
    double simulated_seconds = 0.0;
    double tablets_per_hour = 0.0;
    double powder_consumed_mg = 0.0;
    double powder_lost_mg = 0.0;
};

inline json to_json(const ManufactureSummary& s) {
    return {{"requested", s.requested},
            {"produced", s.produced},
            {"d1_rejections", s.d1_rejections},
            {"failed_iterations", s.failed_iterations},
            {"d2_accepted", s.d2_accepted},
            {"d2_rejected", s.d2_rejected},
            {"destroyed", s.destroyed},
            {"mean_weight", s.mean_weight},
            {"weight_rsd", s.weight_rsd},
            {"mean_weight_deviation", s.mean_weight_deviation},
            {"mean_porosity_deviation", s.mean_porosity_deviation},
            {"simulated_seconds", s.simulated_seconds},
            {"tablets_per_hour", s.tablets_per_hour},
            {"powder_consumed_mg", s.powder_consumed_mg},
            {"powder_lost_mg", s.powder_lost_mg}};
}

/// One formulation on the virtual line. Every iteration takes
/// `seconds_per_tablet` of simulated time, including D1 re-doses.
class Plant {
public:
    Plant(PlantConfig cfg, Formulation f) : cfg_(std::move(cfg)), formulation_(std::move(f)), rng_(cfg_.seed) {
        validate(cfg_);
        validate_formulation(formulation_);
        for (const auto& c : formulation_.components)
            if (!cfg_.pure_spectra.count(c.material_id))
                cfg_.pure_spectra.emplace(c.material_id, pure_spectrum(c.material_id, cfg_.spectral.grid));
    }

    const PlantConfig& config() const { return cfg_; }
    const Formulation& formulation() const { return formulation_; }
    const CampaignLog& log() const { return log_; }
    double clock() const { return clock_; }
    int iterations() const { return iteration_; }
    double powder_consumed() const { return consumed_; }
    double powder_lost() const { return lost_; }
    int d1_rejections() const { return d1_rejections_; }

    /// One pass through the workflow: dose, D1 (with re-dosing), NIR spectrum,
    /// compaction, test, D2, then store or discard and clean.
    IterationResult run_iteration(const ProcessSettings& s, bool destructive, bool outlier_spectrum = false) {
        IterationResult r;
        const double t0 = clock_;
        const int it = iteration_++;
        const double target = cfg_.effective_dose_target();
        GateVerdict d1 = GateVerdict::Rejected;
        while (r.d1_attempts < cfg_.d1_max_attempts && d1 != GateVerdict::Accepted) {
            r.dose = dose_powder(target, cfg_, rng_);
            ++r.d1_attempts;
            log_.add(t0, it, "dose", {{"target", target}, {"measured", r.dose.measured}, {"attempt", r.d1_attempts}});
            d1 = gate_d1(r.dose.measured, target, cfg_.d1_tolerance);
            log_.add(t0, it, "d1", {{"verdict", to_string(d1)}, {"deviation", (r.dose.measured - target) / target}});
            if (d1 != GateVerdict::Accepted) ++d1_rejections_;
        }
        clock_ = t0 + cfg_.seconds_per_tablet;
        if (d1 != GateVerdict::Accepted) {
            r.failed = true;
            r.tablet.d1_verdict = GateVerdict::Rejected;
            log_.add(t0, it, "failed", {{"reason", "d1 attempts exhausted"}});
            return r;
        }
        consumed_ += r.dose.measured;
        lost_ += r.dose.loss;

        r.spectrum = synth_spectrum(formulation_, cfg_, rng_, outlier_spectrum);
        r.spectrum.iteration = it;
        log_.add(t0, it, "spectrum", {{"points", r.spectrum.size()}, {"outlier_injected", outlier_spectrum}});

        r.tablet = compress_tablet(r.dose.measured - r.dose.loss, s, cfg_.truth, cfg_, rng_);
        r.tablet.d1_verdict = GateVerdict::Accepted;
        log_.add(t0, it, "compress",
                 {{"precompression", s.precompression_pressure},
                  {"main_compression", s.main_compression_pressure},
                  {"dwell", s.dwell_time},
                  {"loss", r.dose.loss}});

        r.tablet = test_tablet(r.tablet, destructive, cfg_.truth, cfg_, rng_);
        log_.add(t0, it, "test", to_json(r.tablet));

        r.tablet.d2_verdict = gate_d2(r.tablet, cfg_.targets, cfg_.d2_tolerance);
        log_.add(t0, it, "d2", {{"verdict", to_string(r.tablet.d2_verdict)}});
        const std::string channel = r.tablet.destroyed ? "damaged"
                                    : r.tablet.d2_verdict == GateVerdict::Accepted ? "accepted"
                                                                                  : "rejected";
        log_.add(t0, it, "store", {{"channel", channel}});
        log_.add(t0, it, "clean");
        return r;
    }

    /// Replicate tablets at fixed settings, all tested destructively and averaged.
    Observation run_experiment(const ProcessSettings& s, int replicates = 3) {
        Observation o;
        o.settings = s;
        for (int k = 0; k < replicates; ++k) {
            const auto r = run_iteration(s, true);
            if (r.failed || r.tablet.failed || !r.tablet.tensile_strength) continue;
            o.porosity += r.tablet.porosity;
            o.tensile_strength += *r.tablet.tensile_strength;
            o.elastic_recovery += r.tablet.elastic_recovery;
            ++o.replicates;
        }
        if (o.replicates == 0) throw Error(ErrorCode::PlantFailure, "no tablet produced at P = " + io::fmt(s.main_compression_pressure));
        o.porosity /= o.replicates;
        o.tensile_strength /= o.replicates;
        o.elastic_recovery /= o.replicates;
        return o;
    }

    ManufactureSummary manufacture(const ProcessSettings& s, int n) {
        if (n < 1) throw Error(ErrorCode::EmptyData, "manufacture needs n >= 1");
        ManufactureSummary m;
        m.requested = n;
        const double start = clock_, consumed0 = consumed_, lost0 = lost_;
        const int rej0 = d1_rejections_;
        std::vector<double> weights;
        double porosity_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const bool destructive = (i + 1) % cfg_.destructive_every == 0;
            const auto r = run_iteration(s, destructive);
            if (r.failed) {
                ++m.failed_iterations;
                continue;
            }
            ++m.produced;
            weights.push_back(r.tablet.weight);
            porosity_sum += r.tablet.porosity;
            if (r.tablet.destroyed) ++m.destroyed;
            (r.tablet.d2_verdict == GateVerdict::Accepted ? m.d2_accepted : m.d2_rejected)++;
        }
        m.d1_rejections = d1_rejections_ - rej0;
        m.simulated_seconds = clock_ - start;
        m.tablets_per_hour = 3600.0 * n / m.simulated_seconds;
        m.powder_consumed_mg = consumed_ - consumed0;
        m.powder_lost_mg = lost_ - lost0;
        if (!weights.empty()) {
            double sum = 0.0;
            for (double w : weights) sum += w;
            m.mean_weight = sum / static_cast<double>(weights.size());
            double ss = 0.0;
            for (double w : weights) ss += (w - m.mean_weight) * (w - m.mean_weight);
            const double sd = weights.size() > 1 ? std::sqrt(ss / static_cast<double>(weights.size() - 1)) : 0.0;
            m.weight_rsd = sd / m.mean_weight;
            m.mean_weight_deviation = std::abs(m.mean_weight - cfg_.targets.target_weight) / cfg_.targets.target_weight;
            const double mean_eps = porosity_sum / static_cast<double>(weights.size());
            m.mean_porosity_deviation = std::abs(mean_eps - cfg_.targets.target_porosity) / cfg_.targets.target_porosity;
        }
        log_.add(clock_, iteration_, "summary", to_json(m));
        return m;
    }

private:
    PlantConfig cfg_;
    Formulation formulation_;
    Rng rng_;
    CampaignLog log_;
    double clock_ = 0.0;
    int iteration_ = 0;
    double consumed_ = 0.0;
    double lost_ = 0.0;
    int d1_rejections_ = 0;
};

struct ManufactureResult {
    ManufactureSummary summary;
    CampaignLog log;
};

inline ManufactureResult run_manufacture(const Formulation& f, const ProcessSettings& s, int n, const PlantConfig& cfg) {
    Plant p(cfg, f);
    auto summary = p.manufacture(s, n);
    return {summary, p.log()};
}

// ---------------------------------------------------------------- ground-truth map

/// Synthetic material-to-physics map. Compressibility and compactability
/// parameters are smooth functions of blend properties; the API's descriptors
/// shift them in proportion to loading so they carry learnable signal.
struct TruthMap {
    double b_base = 0.008;
    double b_carr = 0.045;
    double b_rugosity = 1.5;
    double b_charge = 1.0;
    double eps0_packing = 2.0;
    double t_scale = 14.0;
    double t_donor = 8.0;
    double t_dimensionality = 0.3;
    double kb_base = 4.0;
    double kb_tapped = 8.0;
    double kb_axis = 3.0;
    ElasticRecoveryModel elastic;
};

inline GroundTruth ground_truth(const Formulation& f, const mixture::MixtureModel& model, const TruthMap& map = {}) {
    const auto b = mixture::blend_properties(f, model);
    std::vector<double> d(kDescriptorCount, 0.0);
    double loading = 0.0;
    if (const auto api = api_component(f, model.library)) {
        const auto& rec = model.library.at(api->material_id);
        if (rec.descriptors) d = *rec.descriptors;
        loading = api->fraction;
    }
    // descriptor columns: packing, donor, acceptor, rugosity, charge, s/m axis, m/l axis, dimensionality
    const double packing = loading > 0.0 ? d[0] - 0.70 : 0.0;
    const double donor = loading > 0.0 ? d[1] - 0.02 : 0.0;
    const double rugosity = loading > 0.0 ? d[3] - 1.7 : 0.0;
    const double charge = loading > 0.0 ? d[4] + 0.35 : 0.0;
    const double axis = loading > 0.0 ? d[5] - 0.8 : 0.0;
    const double dim = d[7];

    GroundTruth g;
    g.true_density = b.true_density;
    const double carr = (b.tapped_density - b.bulk_density) / b.tapped_density;
    g.kawakita.eps0 = std::clamp(1.0 - b.tapped_density / b.true_density + loading * map.eps0_packing * packing, 0.3, 0.85);
    g.kawakita.B = (map.b_base + map.b_carr * carr) *
                   std::exp(loading * (map.b_rugosity * rugosity + map.b_charge * charge));
    g.rysh_duck.T_hat = (map.t_scale * (1.0 - b.bulk_density / b.true_density) - 1.0) *
                        std::exp(loading * (map.t_donor * donor - map.t_dimensionality * dim));
    g.rysh_duck.k_b = map.kb_base + map.kb_tapped * b.tapped_density / b.true_density + loading * map.kb_axis * axis;
    g.elastic = map.elastic;
    return g;
}

// ---------------------------------------------------------------- training data

struct SamplerConfig {
    std::vector<std::string> apis{"SP", "GR", "IM"};
    double placebo_fraction = 0.2;
    double min_loading = 0.05;
    double max_loading = 0.5;
    std::vector<std::string> fillers{"MCC1", "MCC2", "MCC3", "LAC1", "LAC2", "MAN", "DCPA"};
    double disintegrant = 0.035;
    double lubricant = 0.01;
    double min_pressure = 50.0;
    double max_pressure = 400.0;
    double porosity_noise = 0.005;
    double ts_log_noise = 0.05;
};

/// Draws a random formulation: optional API, one or two fillers, fixed
/// disintegrant and lubricant.
inline Formulation sample_formulation(const SamplerConfig& sc, Rng& rng, std::string& api_id) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Formulation f;
    double loading = 0.0;
    api_id = "placebo";
    if (sc.apis.empty() || u(rng) >= sc.placebo_fraction) {
        if (sc.apis.empty()) throw Error(ErrorCode::EmptyData, "no APIs to sample");
        api_id = sc.apis[std::uniform_int_distribution<std::size_t>(0, sc.apis.size() - 1)(rng)];
        loading = sc.min_loading + (sc.max_loading - sc.min_loading) * u(rng);
        f.components.push_back({api_id, loading});
    }
    f.components.push_back({"CCS", sc.disintegrant});
    f.components.push_back({"MgSt", sc.lubricant});
    const double free = 1.0 - loading - sc.disintegrant - sc.lubricant;
    std::uniform_int_distribution<std::size_t> pick(0, sc.fillers.size() - 1);
    const auto e1 = sc.fillers[pick(rng)], e2 = sc.fillers[pick(rng)];
    const double split = u(rng);
    if (e1 == e2) {
        f.components.push_back({e1, free});
    } else {
        f.components.push_back({e1, split * free});
        f.components.push_back({e2, free - split * free});
    }
    return f;
}

/// `n` tablets from random formulations at random pressures. Porosity follows
/// the in-die compressibility of each blend's ground truth; tensile strength
/// follows its compactability at the noiseless porosity.
inline surrogate::Dataset generate_training_set(const mixture::MixtureModel& model, const SamplerConfig& sc, int n,
                                                std::uint64_t seed, const TruthMap& map = {}) {
    surrogate::Dataset d;
    Rng rng(seed);
    std::uniform_real_distribution<double> up(sc.min_pressure, sc.max_pressure);
    for (int i = 0; i < n; ++i) {
        std::string api;
        const Formulation f = sample_formulation(sc, rng, api);
        const double p = up(rng);
        const auto truth = ground_truth(f, model, map);
        const double eps = physics::kawakita_porosity(p, truth.kawakita);
        const double ts = physics::rd_tensile_strength(eps, truth.rysh_duck);
        const double en = sc.porosity_noise > 0.0 ? std::normal_distribution<double>(0.0, sc.porosity_noise)(rng) : 0.0;
        const double tn = sc.ts_log_noise > 0.0 ? std::normal_distribution<double>(0.0, sc.ts_log_noise)(rng) : 0.0;
        d.append(surrogate::features_for(f, model, p), std::max(eps + en, 1e-3), ts * std::exp(tn), api);
    }
    return d;
}

}  // namespace tabletlab::plant
