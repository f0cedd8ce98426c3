#pragma once

// Physics-informed Bayesian optimization of the main compression pressure
// towards a target porosity. A GP over pressure proposes experiments by
// expected improvement of |eps - target|; proposals that would worsen the
// Kawakita or Ryshkewitch-Duckworth fits are screened out.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/gp.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/log.hpp"
#include "tabletlab/optim.hpp"
#include "tabletlab/physics.hpp"
#include "tabletlab/plant.hpp"

namespace tabletlab::pibo {

using nlohmann::json;

struct PiboConfig {
    double target_porosity = 0.15;
    double min_pressure = 70.0;   // MPa
    double max_pressure = 450.0;  // MPa
    double precompression_pressure = 10.0;
    double dwell_time = 50.0;     // ms
    int replicates = 3;
    int max_iterations = 10;      // total experiments, seeds included
    double termination_threshold = 0.20;
    int candidates = 512;
    double screen_tolerance = 1e-12;
    gp::GpConfig gp;
};

struct Measurement {
    double pressure = 0.0;
    double porosity = 0.0;
    double tensile_strength = 0.0;
    int replicates = 0;
};

struct TuningParameters {
    double eps0 = 0.0;
    double B = 0.0;
    double T_hat = 0.0;
    double k_b = 0.0;
};

struct PiboState {
    double target_porosity = 0.15;
    gp::Bounds bounds{{70.0, 450.0}};
    std::vector<Measurement> observations;
    std::optional<gp::GpState> gp_porosity;
    std::optional<gp::GpState> gp_log_strength;
    std::optional<physics::KawakitaParams> kawakita;
    std::optional<physics::RyshDuckParams> rysh_duck;
    std::vector<TuningParameters> history;
    std::vector<double> rmse_kawakita;
    std::vector<double> rmse_rysh_duck;
};

namespace detail {

inline std::vector<physics::CompressionPoint> compression_points(const std::vector<Measurement>& obs) {
    std::vector<physics::CompressionPoint> out;
    for (const auto& o : obs) out.push_back({o.pressure, o.porosity});
    return out;
}

inline std::vector<physics::StrengthPoint> strength_points(const std::vector<Measurement>& obs) {
    std::vector<physics::StrengthPoint> out;
    for (const auto& o : obs) out.push_back({o.porosity, o.tensile_strength});
    return out;
}

struct PhysicsFit {
    physics::KawakitaParams kawakita;
    physics::RyshDuckParams rysh_duck;
    double rmse_kawakita;
    double rmse_rysh_duck;
};

inline PhysicsFit fit_physics(const std::vector<Measurement>& obs) {
    if (obs.size() < 2) throw Error(ErrorCode::InsufficientData, "physics refit needs >= 2 observations");
    const auto cp = compression_points(obs);
    const auto sp = strength_points(obs);
    PhysicsFit f;
    f.kawakita = physics::fit_kawakita(cp);
    f.rysh_duck = physics::fit_rd(sp);
    f.rmse_kawakita = physics::model_rmse(f.kawakita, std::span<const physics::CompressionPoint>(cp));
    f.rmse_rysh_duck = physics::model_rmse(f.rysh_duck, std::span<const physics::StrengthPoint>(sp));
    return f;
}

}  // namespace detail

inline PiboState make_state(const PiboConfig& cfg) {
    if (!(cfg.max_pressure > cfg.min_pressure) || cfg.min_pressure < 0.0)
        throw Error(ErrorCode::InvalidBounds, "pressure bounds");
    PiboState s;
    s.target_porosity = cfg.target_porosity;
    s.bounds = {{cfg.min_pressure, cfg.max_pressure}};
    return s;
}

/// Least-squares refits of both physics models on every observation; the
/// fitted parameters and RMSEs are appended to the history.
inline void refit_physics(PiboState& s) {
    const auto f = detail::fit_physics(s.observations);
    s.kawakita = f.kawakita;
    s.rysh_duck = f.rysh_duck;
    s.history.push_back({f.kawakita.eps0, f.kawakita.B, f.rysh_duck.T_hat, f.rysh_duck.k_b});
    s.rmse_kawakita.push_back(f.rmse_kawakita);
    s.rmse_rysh_duck.push_back(f.rmse_rysh_duck);
}

inline void refit_gps(PiboState& s, const gp::GpConfig& cfg) {
    if (s.observations.empty()) throw Error(ErrorCode::EmptyData, "no observations");
    const auto n = static_cast<Eigen::Index>(s.observations.size());
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd eps(n), log_ts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = s.observations[static_cast<std::size_t>(i)];
        x(i, 0) = o.pressure;
        eps(i) = o.porosity;
        if (!(o.tensile_strength > 0.0)) throw Error(ErrorCode::NonPositiveStrength, "tensile strength " + io::fmt(o.tensile_strength));
        log_ts(i) = std::log(o.tensile_strength);
    }
    s.gp_porosity = gp::fit_gp(x, eps, cfg, s.bounds);
    s.gp_log_strength = gp::fit_gp(x, log_ts, cfg, s.bounds);
}

/// Closed-form E[max(0, best - |X - target|)] for X ~ N(mean, std^2).
inline double expected_improvement_abs(double mean, double std, double target, double best) {
    if (!(best > 0.0)) return 0.0;
    const double m = mean - target;
    if (std < 1e-12) return std::max(0.0, best - std::abs(m));
    using gp::detail::normal_cdf;
    using gp::detail::normal_pdf;
    const double u1 = (-best - m) / std, u0 = -m / std, u2 = (best - m) / std;
    const double c1 = normal_cdf(u1), c0 = normal_cdf(u0), c2 = normal_cdf(u2);
    const double p1 = normal_pdf(u1), p0 = normal_pdf(u0), p2 = normal_pdf(u2);
    const double ei = best * (c2 - c1) - m * (c2 - c0) - std * (p0 - p2) + m * (c0 - c1) + std * (p1 - p0);
    return std::max(0.0, ei);
}

inline double best_deviation(const PiboState& s) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : s.observations) best = std::min(best, std::abs(o.porosity - s.target_porosity));
    return best;
}

struct Candidate {
    double pressure = 0.0;
    double expected_improvement = 0.0;
    double predicted_porosity = 0.0;
    double predicted_tensile_strength = 0.0;
    double hypothetical_rmse_kawakita = 0.0;
    double hypothetical_rmse_rysh_duck = 0.0;
    bool passes_screen = false;
};

struct Selection {
    Candidate chosen;
    bool relaxed = false;  // every candidate failed the physics screen
    int screened_out = 0;
    int candidates = 0;
};

namespace detail {

inline Candidate score(const PiboState& s, double pressure, const PiboConfig& cfg) {
    Candidate c;
    c.pressure = pressure;
    Eigen::VectorXd x(1);
    x << pressure;
    const auto pe = gp::gp_posterior(*s.gp_porosity, x);
    const auto pt = gp::gp_posterior(*s.gp_log_strength, x);
    c.predicted_porosity = pe.mean;
    c.predicted_tensile_strength = std::exp(pt.mean);
    c.expected_improvement = expected_improvement_abs(pe.mean, pe.std, s.target_porosity, best_deviation(s));
    if (s.kawakita && s.rysh_duck && s.observations.size() >= 2 && c.predicted_porosity > 0.0) {
        auto obs = s.observations;
        obs.push_back({pressure, c.predicted_porosity, c.predicted_tensile_strength, 0});
        try {
            const auto f = fit_physics(obs);
            c.hypothetical_rmse_kawakita = f.rmse_kawakita;
            c.hypothetical_rmse_rysh_duck = f.rmse_rysh_duck;
            c.passes_screen = f.rmse_kawakita <= s.rmse_kawakita.back() + cfg.screen_tolerance &&
                              f.rmse_rysh_duck <= s.rmse_rysh_duck.back() + cfg.screen_tolerance;
        } catch (const Error&) {
            c.passes_screen = false;
        }
    } else if (!s.kawakita) {
        c.passes_screen = true;
    }
    return c;
}

inline bool preferred(const Candidate& a, const Candidate& b) {
    if (a.expected_improvement != b.expected_improvement) return a.expected_improvement > b.expected_improvement;
    return a.pressure < b.pressure;
}

}  // namespace detail

/// Max-EI pressure over a regular grid among candidates passing the physics
/// screen, polished by a bounded 1-D search around the winning cell.
inline Selection select_next_pressure(const PiboState& s, const PiboConfig& cfg) {
    if (!s.gp_porosity || !s.gp_log_strength) throw Error(ErrorCode::NotFitted, "GP not fitted");
    const double lo = s.bounds.front().lo, hi = s.bounds.front().hi;
    const int n = std::max(2, cfg.candidates);
    const double step = (hi - lo) / (n - 1);
    Selection sel;
    sel.candidates = n;
    std::optional<Candidate> best_screened, best_any;
    for (int i = 0; i < n; ++i) {
        const auto c = detail::score(s, i == n - 1 ? hi : lo + i * step, cfg);
        if (!best_any || detail::preferred(c, *best_any)) best_any = c;
        if (c.passes_screen) {
            if (!best_screened || detail::preferred(c, *best_screened)) best_screened = c;
        } else {
            ++sel.screened_out;
        }
    }
    sel.relaxed = !best_screened;
    Candidate chosen = sel.relaxed ? *best_any : *best_screened;
    if (sel.relaxed) log().warn("pibo: all {} candidates fail the physics screen, using unconstrained EI", n);

    const double a = std::max(lo, chosen.pressure - step), b = std::min(hi, chosen.pressure + step);
    auto objective = [&](const Eigen::VectorXd& u) {
        const double p = a + std::clamp(u(0), 0.0, 1.0) * (b - a);
        return -detail::score(s, p, cfg).expected_improvement;
    };
    Eigen::VectorXd start(1);
    start << (chosen.pressure - a) / (b - a);
    const auto m = optim::nelder_mead(objective, start, {60, 0.25, 1e-14, 1e-9});
    const auto refined = detail::score(s, a + std::clamp(m.x(0), 0.0, 1.0) * (b - a), cfg);
    if (refined.expected_improvement > chosen.expected_improvement && (sel.relaxed || refined.passes_screen)) chosen = refined;
    sel.chosen = chosen;
    return sel;
}

/// True once every tuning parameter moved by less than `threshold` (relative)
/// in each of the last two refits.
inline bool check_termination(const std::vector<TuningParameters>& history, double threshold = 0.20) {
    if (history.size() < 3) return false;
    auto small = [&](double prev, double cur) { return std::abs(cur - prev) / std::max(std::abs(prev), 1e-9) < threshold; };
    for (std::size_t k = history.size() - 2; k < history.size(); ++k) {
        const auto& p = history[k - 1];
        const auto& c = history[k];
        if (!(small(p.eps0, c.eps0) && small(p.B, c.B) && small(p.T_hat, c.T_hat) && small(p.k_b, c.k_b))) return false;
    }
    return true;
}

inline bool check_termination(const PiboState& s, double threshold = 0.20) {
    return check_termination(s.history, threshold);
}

struct ValidationPressure {
    double pressure = 0.0;
    bool clamped = false;
};

inline ValidationPressure validation_pressure(const PiboState& s) {
    if (!s.kawakita) throw Error(ErrorCode::NotFitted, "physics models not fitted");
    const double lo = s.bounds.front().lo, hi = s.bounds.front().hi;
    double p;
    try {
        p = physics::kawakita_pressure_for_porosity(s.target_porosity, *s.kawakita);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::TargetAboveInitialPorosity) throw;
        p = 0.0;
    }
    ValidationPressure v{std::clamp(p, lo, hi), false};
    if (v.pressure != p) {
        v.clamped = true;
        log().warn("pibo: suggested pressure {} MPa clamped to {} MPa", io::fmt(p), io::fmt(v.pressure));
    }
    return v;
}

struct IterationRecord {
    int experiment = 0;
    Measurement measurement;
    std::string origin;  // "seed" or "ei"
    double expected_improvement = 0.0;
    bool relaxed = false;
    int screened_out = 0;
    std::optional<TuningParameters> parameters;
    std::optional<double> rmse_kawakita;
    std::optional<double> rmse_rysh_duck;
};

struct Validation {
    double pressure = 0.0;
    bool clamped = false;
    double measured_porosity = 0.0;
    double measured_tensile_strength = 0.0;
    double predicted_porosity = 0.0;
    double predicted_tensile_strength = 0.0;
    double porosity_error() const { return measured_porosity - predicted_porosity; }
    double tensile_strength_error() const { return measured_tensile_strength - predicted_tensile_strength; }
};

struct PiboReport {
    double target_porosity = 0.15;
    std::vector<IterationRecord> iterations;
    bool converged = false;
    int experiments = 0;
    std::optional<TuningParameters> final_parameters;
    std::optional<Validation> validation;
};

inline PiboReport run_pibo(plant::Plant& plant, const PiboConfig& cfg) {
    auto s = make_state(cfg);
    PiboReport r;
    r.target_porosity = cfg.target_porosity;
    auto settings = [&](double p) { return ProcessSettings{cfg.precompression_pressure, p, cfg.dwell_time}; };
    auto execute = [&](double p, std::string origin, const Selection* sel) {
        const auto o = plant.run_experiment(settings(p), cfg.replicates);
        s.observations.push_back({p, o.porosity, o.tensile_strength, o.replicates});
        IterationRecord rec;
        rec.experiment = static_cast<int>(s.observations.size());
        rec.measurement = s.observations.back();
        rec.origin = std::move(origin);
        if (sel) {
            rec.expected_improvement = sel->chosen.expected_improvement;
            rec.relaxed = sel->relaxed;
            rec.screened_out = sel->screened_out;
        }
        if (s.observations.size() >= 2) {
            refit_physics(s);
            rec.parameters = s.history.back();
            rec.rmse_kawakita = s.rmse_kawakita.back();
            rec.rmse_rysh_duck = s.rmse_rysh_duck.back();
        }
        refit_gps(s, cfg.gp);
        r.iterations.push_back(rec);
    };

    for (double p : {cfg.min_pressure, cfg.max_pressure}) {
        if (static_cast<int>(s.observations.size()) >= cfg.max_iterations) break;
        execute(p, "seed", nullptr);
    }
    while (static_cast<int>(s.observations.size()) < cfg.max_iterations && !check_termination(s, cfg.termination_threshold)) {
        const auto sel = select_next_pressure(s, cfg);
        execute(sel.chosen.pressure, "ei", &sel);
    }
    r.converged = check_termination(s, cfg.termination_threshold);
    r.experiments = static_cast<int>(s.observations.size());
    if (!r.converged && r.experiments > 0)
        log().warn("pibo: no convergence after {} experiments", r.experiments);
    if (!s.history.empty()) r.final_parameters = s.history.back();

    if (s.kawakita && s.rysh_duck) {
        const auto vp = validation_pressure(s);
        const auto o = plant.run_experiment(settings(vp.pressure), cfg.replicates);
        Validation v;
        v.pressure = vp.pressure;
        v.clamped = vp.clamped;
        v.measured_porosity = o.porosity;
        v.measured_tensile_strength = o.tensile_strength;
        v.predicted_porosity = physics::kawakita_porosity(vp.pressure, *s.kawakita);
        v.predicted_tensile_strength =
            physics::rd_tensile_strength(std::clamp(v.predicted_porosity, 0.0, 1.0 - 1e-12), *s.rysh_duck);
        r.validation = v;
    }
    return r;
}

inline json to_json(const TuningParameters& t) {
    return {{"eps0", t.eps0}, {"B", t.B}, {"T_hat", t.T_hat}, {"k_b", t.k_b}};
}

inline json to_json(const PiboReport& r) {
    json iters = json::array();
    for (const auto& it : r.iterations) {
        json j{{"experiment", it.experiment},
               {"origin", it.origin},
               {"pressure", it.measurement.pressure},
               {"porosity", it.measurement.porosity},
               {"tensile_strength", it.measurement.tensile_strength},
               {"replicates", it.measurement.replicates},
               {"expected_improvement", it.expected_improvement},
               {"screen_relaxed", it.relaxed},
               {"screened_out", it.screened_out}};
        if (it.parameters) j["parameters"] = to_json(*it.parameters);
        if (it.rmse_kawakita) j["rmse_kawakita"] = *it.rmse_kawakita;
        if (it.rmse_rysh_duck) j["rmse_rysh_duck"] = *it.rmse_rysh_duck;
        iters.push_back(std::move(j));
    }
    json out{{"target_porosity", r.target_porosity},
             {"converged", r.converged},
             {"experiments", r.experiments},
             {"iterations", std::move(iters)}};
    if (r.final_parameters) out["parameters"] = to_json(*r.final_parameters);
    if (r.validation) {
        const auto& v = *r.validation;
        out["validation"] = {{"pressure", v.pressure},
                             {"clamped", v.clamped},
                             {"measured_porosity", v.measured_porosity},
                             {"predicted_porosity", v.predicted_porosity},
                             {"porosity_error", v.porosity_error()},
                             {"measured_tensile_strength", v.measured_tensile_strength},
                             {"predicted_tensile_strength", v.predicted_tensile_strength},
                             {"tensile_strength_error", v.tensile_strength_error()}};
    }
    return out;
}

/// Calibrated compressibility and compactability curves on a pressure grid.
inline std::string curves_csv(const TuningParameters& t, double min_pressure, double max_pressure, int points = 50) {
    std::ostringstream out;
    out << "pressure,porosity,tensile_strength\n";
    const physics::KawakitaParams k{t.eps0, t.B};
    const physics::RyshDuckParams rd{t.T_hat, t.k_b};
    for (int i = 0; i < points; ++i) {
        const double p = points == 1 ? min_pressure : min_pressure + (max_pressure - min_pressure) * i / (points - 1);
        const double eps = physics::kawakita_porosity(p, k);
        out << io::fmt(p) << ',' << io::fmt(eps) << ',' << io::fmt(physics::rd_tensile_strength(std::clamp(eps, 0.0, 1.0 - 1e-12), rd)) << '\n';
    }
    return out.str();
}

}  // namespace tabletlab::pibo
