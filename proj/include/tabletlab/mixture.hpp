#pragma once

// Blend-level property prediction from component properties and mass
// fractions. All rules sit behind MixingRules so alternates can be swapped.

#include <array>
#include <cmath>
#include <vector>

#include "tabletlab/chemometrics.hpp"
#include "tabletlab/core.hpp"
#include "tabletlab/materials.hpp"

namespace tabletlab::mixture {

enum class MeanRule { Harmonic, Arithmetic, Geometric };

struct MixingRules {
    MeanRule density = MeanRule::Harmonic;  // volume additivity
    MeanRule ffc = MeanRule::Geometric;
};

struct BlendProperties {
    double true_density = 0.0;
    double bulk_density = 0.0;
    double tapped_density = 0.0;
    Distribution psd;
    Distribution aspect_ratio;
    std::array<double, 3> psd_pcs{};
    std::array<double, 3> ar_pcs{};
    double ffc = 0.0;  // reported nominally at 1.6 kPa consolidation
};

namespace detail {

inline void require_components(const Formulation& f) {
    if (f.components.empty()) throw Error(ErrorCode::EmptyFormulation, "formulation has no components");
}

template <class Getter>
double weighted_mean(const Formulation& f, const MaterialLibrary& lib, MeanRule rule, Getter get) {
    require_components(f);
    double acc = 0.0, wsum = 0.0;
    for (const auto& c : f.components) {
        const double v = get(lib.at(c.material_id));
        wsum += c.fraction;
        switch (rule) {
        case MeanRule::Harmonic: acc += c.fraction / v; break;
        case MeanRule::Arithmetic: acc += c.fraction * v; break;
        case MeanRule::Geometric: acc += c.fraction * std::log(v); break;
        }
    }
    acc /= wsum;
    switch (rule) {
    case MeanRule::Harmonic: return 1.0 / acc;
    case MeanRule::Arithmetic: return acc;
    case MeanRule::Geometric: return std::exp(acc);
    }
    return acc;
}

}  // namespace detail

inline double blend_true_density(const Formulation& f, const MaterialLibrary& lib,
                                 const MixingRules& rules = {}) {
    return detail::weighted_mean(f, lib, rules.density, [](const MaterialRecord& m) { return m.true_density; });
}

struct BulkTapped {
    double bulk;
    double tapped;
};

inline BulkTapped blend_bulk_tapped_density(const Formulation& f, const MaterialLibrary& lib,
                                            const MixingRules& rules = {}) {
    return {detail::weighted_mean(f, lib, rules.density, [](const MaterialRecord& m) { return m.bulk_density; }),
            detail::weighted_mean(f, lib, rules.density, [](const MaterialRecord& m) { return m.tapped_density; })};
}

inline double blend_ffc(const Formulation& f, const MaterialLibrary& lib, const MixingRules& rules = {}) {
    for (const auto& c : f.components)
        if (!(lib.at(c.material_id).ffc > 0.0))
            throw Error(ErrorCode::NonPositiveFFC, c.material_id);
    return detail::weighted_mean(f, lib, rules.ffc, [](const MaterialRecord& m) { return m.ffc; });
}

/// Mass-weighted convex combination of component distributions, renormalized.
inline Distribution blend_distribution(const Formulation& f, const MaterialLibrary& lib, DistributionKind which) {
    detail::require_components(f);
    auto pick = [which](const MaterialRecord& m) -> const Distribution& {
        return which == DistributionKind::Psd ? m.psd : m.aspect_ratio;
    };
    const Distribution& first = pick(lib.at(f.components.front().material_id));
    Distribution out{first.grid, std::vector<double>(first.grid.size(), 0.0)};
    for (const auto& c : f.components) {
        const Distribution& d = pick(lib.at(c.material_id));
        if (d.grid.size() != out.grid.size() || d.mass.size() != out.grid.size())
            throw Error(ErrorCode::GridMismatch, c.material_id + " distribution grid differs");
        for (std::size_t i = 0; i < d.grid.size(); ++i) {
            if (std::abs(d.grid[i] - out.grid[i]) > 1e-9 * std::max(1.0, std::abs(out.grid[i])))
                throw Error(ErrorCode::GridMismatch, c.material_id + " distribution grid differs");
            out.mass[i] += c.fraction * d.mass[i];
        }
    }
    normalize(out);
    return out;
}

/// PCA basis over a training family of distributions.
struct DistributionBasis {
    chemo::PcaModel pca;
    bool fitted() const { return pca.k > 0; }
};

inline DistributionBasis fit_distribution_basis(const std::vector<Distribution>& training) {
    if (training.size() < 2) throw Error(ErrorCode::TooFewSamples, "basis needs >= 2 distributions");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(training.size()),
                      static_cast<Eigen::Index>(training.front().mass.size()));
    for (std::size_t i = 0; i < training.size(); ++i) {
        if (training[i].mass.size() != training.front().mass.size())
            throw Error(ErrorCode::GridMismatch, "training distributions differ in length");
        for (std::size_t j = 0; j < training[i].mass.size(); ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = training[i].mass[j];
    }
    return {chemo::pca_fit(X, 3)};
}

/// Basis over every material's distribution of the given kind.
inline DistributionBasis fit_distribution_basis(const MaterialLibrary& lib, DistributionKind which) {
    std::vector<Distribution> training;
    for (const auto& id : lib.ids()) {
        const auto& m = lib.at(id);
        training.push_back(which == DistributionKind::Psd ? m.psd : m.aspect_ratio);
    }
    return fit_distribution_basis(training);
}

/// First three centered PCA scores; components the basis lacks are zero.
inline std::array<double, 3> distribution_pcs(const DistributionBasis& basis, const Distribution& target) {
    if (!basis.fitted()) throw Error(ErrorCode::BasisNotFitted, "distribution basis not fitted");
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(target.mass.data(),
                                                                 static_cast<Eigen::Index>(target.mass.size()));
    const Eigen::VectorXd s = chemo::pca_project(basis.pca, x);
    std::array<double, 3> out{};
    for (Eigen::Index j = 0; j < std::min<Eigen::Index>(3, s.size()); ++j) out[static_cast<std::size_t>(j)] = s(j);
    return out;
}

/// The mixture stage of the hybrid model chain: library, rules and the two
/// fitted distribution bases.
struct MixtureModel {
    MaterialLibrary library;
    MixingRules rules;
    DistributionBasis psd_basis;
    DistributionBasis ar_basis;

    static MixtureModel fit(MaterialLibrary lib, MixingRules rules = {}) {
        MixtureModel m{std::move(lib), rules, {}, {}};
        m.psd_basis = fit_distribution_basis(m.library, DistributionKind::Psd);
        m.ar_basis = fit_distribution_basis(m.library, DistributionKind::AspectRatio);
        return m;
    }
};

inline BlendProperties blend_properties(const Formulation& f, const MixtureModel& model) {
    detail::require_components(f);
    const auto& lib = model.library;
    BlendProperties b;
    b.true_density = blend_true_density(f, lib, model.rules);
    const auto bt = blend_bulk_tapped_density(f, lib, model.rules);
    b.bulk_density = bt.bulk;
    b.tapped_density = bt.tapped;
    b.psd = blend_distribution(f, lib, DistributionKind::Psd);
    b.aspect_ratio = blend_distribution(f, lib, DistributionKind::AspectRatio);
    b.psd_pcs = distribution_pcs(model.psd_basis, b.psd);
    b.ar_pcs = distribution_pcs(model.ar_basis, b.aspect_ratio);
    b.ffc = blend_ffc(f, lib, model.rules);
    return b;
}

}  // namespace tabletlab::mixture
