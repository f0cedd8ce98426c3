#pragma once

// Domain types and the small derived-quantity formulas shared by every
// module. Units are fixed repo-wide: mg, mm, N, MPa, ms; kPa only for powder
// consolidation stresses. Tablets are flat-faced cylinders.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tabletlab/error.hpp"

namespace tabletlab {

inline constexpr double kFractionTolerance = 1e-9;
inline constexpr double kDieDiameter = 9.0;  // mm

enum class Role { API, Filler, Lubricant, Disintegrant };

inline std::string to_string(Role r) {
    switch (r) {
    case Role::API: return "API";
    case Role::Filler: return "filler";
    case Role::Lubricant: return "lubricant";
    case Role::Disintegrant: return "disintegrant";
    }
    return "?";
}

/// Discretized distribution over a shared grid (bin centers).
struct Distribution {
    std::vector<double> grid;
    std::vector<double> mass;

    double total() const {
        double s = 0.0;
        for (double m : mass) s += m;
        return s;
    }
};

struct MaterialRecord {
    std::string id;
    Role role = Role::Filler;
    double bulk_density = 0.0;    // mg/mm^3
    double tapped_density = 0.0;  // mg/mm^3
    double true_density = 0.0;    // mg/mm^3
    double ffc = 0.0;
    double ffc_pressure = 0.0;    // kPa
    Distribution psd;             // um grid
    Distribution aspect_ratio;
    std::optional<std::vector<double>> descriptors;
};

struct Component {
    std::string material_id;
    double fraction = 0.0;
};

struct Formulation {
    std::vector<Component> components;

    double fraction_of(const std::string& id) const {
        for (const auto& c : components)
            if (c.material_id == id) return c.fraction;
        return 0.0;
    }
};

struct ProcessSettings {
    double precompression_pressure = 0.0;    // MPa
    double main_compression_pressure = 0.0;  // MPa
    double dwell_time = 0.0;                 // ms
};

enum class GateVerdict { Accepted, Rejected, Untested };

inline std::string to_string(GateVerdict v) {
    switch (v) {
    case GateVerdict::Accepted: return "accepted";
    case GateVerdict::Rejected: return "rejected";
    case GateVerdict::Untested: return "untested";
    }
    return "?";
}

struct TabletRecord {
    double weight = 0.0;     // mg
    double diameter = 0.0;   // mm
    double thickness = 0.0;  // mm
    std::optional<double> breaking_force;    // N
    double porosity = 0.0;
    std::optional<double> tensile_strength;  // MPa
    double elastic_recovery = 0.0;
    double in_die_thickness = 0.0;           // mm, at peak compression
    GateVerdict d1_verdict = GateVerdict::Untested;
    GateVerdict d2_verdict = GateVerdict::Untested;
    bool destroyed = false;
    bool failed = false;  // no coherent compact was formed
};

struct TargetProfile {
    double drug_loading = 0.2;
    double target_weight = 300.0;  // mg
    double target_porosity = 0.15;
    double ts_threshold = 2.0;     // MPa
    double porosity_threshold = 0.15;
    // D2 gates tensile strength against this when present.
    std::optional<double> target_tensile_strength;
};

/// A value that is still returned when physically implausible, but flagged.
struct FlaggedValue {
    double value = 0.0;
    bool anomaly = false;
};

/// Checks fraction range, sum and uniqueness. Role checks (at most one API)
/// need a material library and live in materials.hpp.
inline void validate_formulation(const Formulation& f) {
    if (f.components.empty())
        throw Error(ErrorCode::FractionSumMismatch, "formulation has no components");
    std::unordered_set<std::string> seen;
    double sum = 0.0;
    for (const auto& c : f.components) {
        if (!(c.fraction >= 0.0) || c.fraction > 1.0)
            throw Error(ErrorCode::NegativeFraction,
                        c.material_id + " fraction " + std::to_string(c.fraction) + " outside [0,1]");
        if (!seen.insert(c.material_id).second)
            throw Error(ErrorCode::DuplicateComponent, c.material_id);
        sum += c.fraction;
    }
    if (std::abs(sum - 1.0) > kFractionTolerance)
        throw Error(ErrorCode::FractionSumMismatch, "fractions sum to " + std::to_string(sum));
}

/// Diametral compression strength 2F/(pi D t); N and mm give MPa.
inline double diametral_tensile_strength(double force, double diameter, double thickness) {
    if (!(diameter > 0.0) || !(thickness > 0.0))
        throw Error(ErrorCode::NonPositiveDimension, "diameter and thickness must be > 0");
    if (force < 0.0) throw Error(ErrorCode::NonPositiveInput, "negative breaking force");
    return 2.0 * force / (std::numbers::pi * diameter * thickness);
}

/// Breaking force that produces a given diametral strength.
inline double breaking_force_for_strength(double sigma, double diameter, double thickness) {
    return sigma * std::numbers::pi * diameter * thickness / 2.0;
}

inline double cylinder_volume(double diameter, double thickness) {
    const double r = diameter / 2.0;
    return std::numbers::pi * r * r * thickness;
}

inline FlaggedValue tablet_porosity(double weight, double diameter, double thickness,
                                    double true_density) {
    if (!(weight > 0.0) || !(diameter > 0.0) || !(thickness > 0.0) || !(true_density > 0.0))
        throw Error(ErrorCode::NonPositiveInput, "tablet_porosity inputs must be > 0");
    const double eps = 1.0 - weight / (true_density * cylinder_volume(diameter, thickness));
    return {eps, eps < 0.0};
}

/// Axial elastic recovery (h_out - h_in) / h_in.
inline FlaggedValue elastic_recovery(double in_die_min_thickness, double ejected_thickness) {
    if (!(in_die_min_thickness > 0.0))
        throw Error(ErrorCode::NonPositiveHeight, "in-die thickness must be > 0");
    const double er = (ejected_thickness - in_die_min_thickness) / in_die_min_thickness;
    return {er, er < 0.0};
}

/// Thickness of a flat-faced tablet of given mass, true density and porosity.
inline double tablet_thickness(double mass, double diameter, double true_density, double porosity) {
    const double r = diameter / 2.0;
    return mass / (true_density * (1.0 - porosity) * std::numbers::pi * r * r);
}

}  // namespace tabletlab
