#pragma once

// Exploration over (precompression, main compression, dwell time) with three
// independent GPs for elastic recovery, porosity and tensile strength, then
// feasible-region extraction and the minimum-ER operating point.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/gp.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/plant.hpp"

namespace tabletlab::mobo {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MoboConfig {
    gp::Interval precompression{10.0, 100.0};  // MPa
    gp::Interval main_compression{70.0, 450.0};  // MPa
    gp::Interval dwell{50.0, 300.0};  // ms
    int lhs_points = 15;
    int iterations = 25;
    int replicates = 3;
    int acquisition_resolution = 20;  // per axis
    std::vector<double> dwell_slices{50.0, 150.0, 300.0};
    int grid_resolution = 20;
    double ts_threshold = 2.0;
    double porosity_threshold = 0.15;
    std::uint64_t seed = 0;
    gp::GpConfig gp;

    gp::Bounds bounds() const { return {precompression, main_compression, dwell}; }
};

struct MoboObservation {
    ProcessSettings settings;
    double elastic_recovery = 0.0;
    double porosity = 0.0;
    double tensile_strength = 0.0;
    int replicates = 0;
    std::string origin;  // "lhs" or "explore"
    double acquisition = 0.0;
};

struct MoboState {
    gp::Bounds bounds;
    std::vector<MoboObservation> observations;
    std::optional<gp::GpState> gp_elastic_recovery;
    std::optional<gp::GpState> gp_porosity;
    std::optional<gp::GpState> gp_tensile_strength;

    bool fitted() const { return gp_elastic_recovery && gp_porosity && gp_tensile_strength; }
};

inline VectorXd as_point(const ProcessSettings& s) {
    VectorXd x(3);
    x << s.precompression_pressure, s.main_compression_pressure, s.dwell_time;
    return x;
}

inline ProcessSettings as_settings(const VectorXd& x) { return {x(0), x(1), x(2)}; }

inline void fit_models(MoboState& s, const gp::GpConfig& cfg) {
    if (s.observations.empty()) throw Error(ErrorCode::EmptyData, "no observations");
    const auto n = static_cast<Eigen::Index>(s.observations.size());
    MatrixXd x(n, 3);
    VectorXd er(n), eps(n), ts(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = s.observations[static_cast<std::size_t>(i)];
        x.row(i) = as_point(o.settings).transpose();
        er(i) = o.elastic_recovery;
        eps(i) = o.porosity;
        ts(i) = o.tensile_strength;
    }
    s.gp_elastic_recovery = gp::fit_gp(x, er, cfg, s.bounds);
    s.gp_porosity = gp::fit_gp(x, eps, cfg, s.bounds);
    s.gp_tensile_strength = gp::fit_gp(x, ts, cfg, s.bounds);
}

struct Acquisition {
    Eigen::Index index = 0;
    VectorXd point;
    double value = 0.0;
};

/// Sum over the three GPs of posterior variance divided by that GP's largest
/// variance on the grid. Ties keep the lowest grid index.
inline Acquisition explore(const MoboState& s, const MatrixXd& grid) {
    if (!s.fitted()) throw Error(ErrorCode::NotFitted, "MOBO models not fitted");
    VectorXd score = VectorXd::Zero(grid.rows());
    for (const auto* g : {&*s.gp_elastic_recovery, &*s.gp_porosity, &*s.gp_tensile_strength}) {
        const auto post = gp::gp_posterior(*g, grid);
        VectorXd var(grid.rows());
        for (Eigen::Index i = 0; i < grid.rows(); ++i) var(i) = post[static_cast<std::size_t>(i)].std * post[static_cast<std::size_t>(i)].std;
        const double top = var.maxCoeff();
        if (top > 0.0) score += var / top;
    }
    Acquisition a;
    for (Eigen::Index i = 1; i < score.size(); ++i)
        if (score(i) > score(a.index)) a.index = i;
    a.point = grid.row(a.index).transpose();
    a.value = score(a.index);
    return a;
}

struct MoboReport {
    MoboState state;
    int lhs_experiments = 0;
    int explore_experiments = 0;
};

inline MoboReport run_mobo(plant::Plant& plant, const MoboConfig& cfg) {
    MoboReport r;
    r.state.bounds = cfg.bounds();
    gp::check_bounds(r.state.bounds);
    auto execute = [&](const VectorXd& x, const char* origin, double acquisition) {
        const auto o = plant.run_experiment(as_settings(x), cfg.replicates);
        r.state.observations.push_back(
            {o.settings, o.elastic_recovery, o.porosity, o.tensile_strength, o.replicates, origin, acquisition});
    };
    if (cfg.lhs_points > 0) {
        const MatrixXd design = gp::lhs_design(cfg.lhs_points, r.state.bounds, cfg.seed);
        for (Eigen::Index i = 0; i < design.rows(); ++i) execute(design.row(i).transpose(), "lhs", 0.0);
        r.lhs_experiments = cfg.lhs_points;
    }
    if (r.state.observations.empty()) return r;
    fit_models(r.state, cfg.gp);
    const MatrixXd grid = gp::regular_grid(r.state.bounds, cfg.acquisition_resolution);
    for (int it = 0; it < cfg.iterations; ++it) {
        const auto a = explore(r.state, grid);
        execute(a.point, "explore", a.value);
        fit_models(r.state, cfg.gp);
        ++r.explore_experiments;
    }
    return r;
}

/// Posterior means of the three models on a precompression x main-compression
/// grid at one dwell time. Matrices are indexed (precompression, main).
struct Slice {
    double dwell = 0.0;
    std::vector<double> precompression;
    std::vector<double> main_compression;
    MatrixXd elastic_recovery;
    MatrixXd porosity;
    MatrixXd tensile_strength;
};

namespace detail {

inline std::vector<double> axis(const gp::Interval& b, int n) {
    std::vector<double> out;
    for (int k = 0; k < n; ++k) out.push_back(n == 1 ? 0.5 * (b.lo + b.hi) : b.lo + b.width() * k / (n - 1));
    return out;
}

}  // namespace detail

inline std::vector<Slice> predict_grid(const MoboState& s, const std::vector<double>& dwells, int resolution) {
    if (!s.fitted()) throw Error(ErrorCode::NotFitted, "MOBO models not fitted");
    if (resolution < 1) throw Error(ErrorCode::InvalidBounds, "grid resolution must be >= 1");
    std::vector<Slice> out;
    for (double dwell : dwells) {
        Slice sl;
        sl.dwell = dwell;
        sl.precompression = detail::axis(s.bounds[0], resolution);
        sl.main_compression = detail::axis(s.bounds[1], resolution);
        MatrixXd pts(resolution * resolution, 3);
        for (int i = 0; i < resolution; ++i)
            for (int j = 0; j < resolution; ++j)
                pts.row(i * resolution + j) << sl.precompression[static_cast<std::size_t>(i)],
                    sl.main_compression[static_cast<std::size_t>(j)], dwell;
        auto fill = [&](const gp::GpState& g) {
            const auto post = gp::gp_posterior(g, pts);
            MatrixXd m(resolution, resolution);
            for (int i = 0; i < resolution; ++i)
                for (int j = 0; j < resolution; ++j) m(i, j) = post[static_cast<std::size_t>(i * resolution + j)].mean;
            return m;
        };
        sl.elastic_recovery = fill(*s.gp_elastic_recovery);
        sl.porosity = fill(*s.gp_porosity);
        sl.tensile_strength = fill(*s.gp_tensile_strength);
        out.push_back(std::move(sl));
    }
    return out;
}

/// The same grids filled with the plant's noiseless response.
inline std::vector<Slice> ground_truth_grid(const plant::GroundTruth& truth, const MoboConfig& cfg) {
    std::vector<Slice> out;
    const int n = cfg.grid_resolution;
    for (double dwell : cfg.dwell_slices) {
        Slice sl;
        sl.dwell = dwell;
        sl.precompression = detail::axis(cfg.precompression, n);
        sl.main_compression = detail::axis(cfg.main_compression, n);
        sl.elastic_recovery.resize(n, n);
        sl.porosity.resize(n, n);
        sl.tensile_strength.resize(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const auto r = plant::noiseless_response(
                    {sl.precompression[static_cast<std::size_t>(i)], sl.main_compression[static_cast<std::size_t>(j)], dwell},
                    truth);
                sl.elastic_recovery(i, j) = r.elastic_recovery;
                sl.porosity(i, j) = r.porosity;
                sl.tensile_strength(i, j) = r.tensile_strength;
            }
        out.push_back(std::move(sl));
    }
    return out;
}

struct Thresholds {
    double tensile_strength = 2.0;  // MPa, at least
    double porosity = 0.15;         // at least
};

inline std::vector<Mask> feasible_region(const std::vector<Slice>& grids, const Thresholds& t) {
    std::vector<Mask> out;
    for (const auto& g : grids) {
        if (g.porosity.rows() != g.tensile_strength.rows() || g.porosity.cols() != g.tensile_strength.cols() ||
            g.elastic_recovery.rows() != g.porosity.rows() || g.elastic_recovery.cols() != g.porosity.cols())
            throw Error(ErrorCode::ShapeMismatch, "slice grids differ in shape");
        out.push_back((g.tensile_strength.array() >= t.tensile_strength) && (g.porosity.array() >= t.porosity));
    }
    return out;
}

struct OperatingPoint {
    ProcessSettings settings;
    double elastic_recovery = 0.0;
    double porosity = 0.0;
    double tensile_strength = 0.0;
};

/// Minimum predicted ER over feasible cells; ties go to lower main pressure,
/// then lower precompression, then lower dwell.
inline OperatingPoint select_operating_point(const std::vector<Slice>& grids, const std::vector<Mask>& masks) {
    if (grids.size() != masks.size()) throw Error(ErrorCode::ShapeMismatch, "one mask per slice required");
    std::optional<OperatingPoint> best;
    auto key = [](const OperatingPoint& p) {
        return std::tuple{p.elastic_recovery, p.settings.main_compression_pressure, p.settings.precompression_pressure,
                          p.settings.dwell_time};
    };
    for (std::size_t k = 0; k < grids.size(); ++k) {
        const auto& g = grids[k];
        const auto& m = masks[k];
        if (m.rows() != g.porosity.rows() || m.cols() != g.porosity.cols())
            throw Error(ErrorCode::ShapeMismatch, "mask does not match slice");
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                if (!m(i, j)) continue;
                OperatingPoint p{{g.precompression[static_cast<std::size_t>(i)], g.main_compression[static_cast<std::size_t>(j)], g.dwell},
                                 g.elastic_recovery(i, j), g.porosity(i, j), g.tensile_strength(i, j)};
                if (!best || key(p) < key(*best)) best = p;
            }
    }
    if (!best) throw Error(ErrorCode::EmptyFeasibleRegion, "no grid cell meets the thresholds");
    return *best;
}

inline double mask_agreement(const std::vector<Mask>& a, const std::vector<Mask>& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "mask counts differ");
    double same = 0.0, total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols()) throw Error(ErrorCode::ShapeMismatch, "mask shapes differ");
        same += static_cast<double>((a[k] == b[k]).count());
        total += static_cast<double>(a[k].size());
    }
    return total > 0.0 ? same / total : 1.0;
}

// ---------------------------------------------------------------- output

/// One CSV per quantity and slice: rows are precompression, columns main pressure.
inline std::string grid_csv(const Slice& s, const MatrixXd& values) {
    std::ostringstream out;
    out << "precompression";
    for (double m : s.main_compression) out << ',' << io::fmt(m);
    out << '\n';
    for (std::size_t i = 0; i < s.precompression.size(); ++i) {
        out << io::fmt(s.precompression[i]);
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << io::fmt(values(static_cast<Eigen::Index>(i), j));
        out << '\n';
    }
    return out.str();
}

inline std::string mask_csv(const Slice& s, const Mask& m) {
    return grid_csv(s, m.cast<double>().matrix());
}

inline std::string observations_csv(const MoboState& s) {
    std::ostringstream out;
    out << "experiment,origin,precompression,main_compression,dwell,elastic_recovery,porosity,tensile_strength,replicates,acquisition\n";
    for (std::size_t i = 0; i < s.observations.size(); ++i) {
        const auto& o = s.observations[i];
        out << i + 1 << ',' << o.origin << ',' << io::fmt(o.settings.precompression_pressure) << ','
            << io::fmt(o.settings.main_compression_pressure) << ',' << io::fmt(o.settings.dwell_time) << ','
            << io::fmt(o.elastic_recovery) << ',' << io::fmt(o.porosity) << ',' << io::fmt(o.tensile_strength) << ','
            << o.replicates << ',' << io::fmt(o.acquisition) << '\n';
    }
    return out.str();
}

inline json to_json(const OperatingPoint& p) {
    return {{"precompression", p.settings.precompression_pressure},
            {"main_compression", p.settings.main_compression_pressure},
            {"dwell", p.settings.dwell_time},
            {"elastic_recovery", p.elastic_recovery},
            {"porosity", p.porosity},
            {"tensile_strength", p.tensile_strength}};
}

}  // namespace tabletlab::mobo
