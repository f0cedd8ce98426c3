#pragma once

// Material library: raw-material records keyed by id, loaded from the
// characterisation CSV plus optional sidecars (descriptor table, PSD and
// aspect-ratio grids), and the named blend fixtures.

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tabletlab/core.hpp"
#include "tabletlab/io.hpp"

namespace tabletlab {

inline constexpr std::size_t kDescriptorCount = 8;

class MaterialLibrary {
public:
    void add(MaterialRecord m) {
        const auto id = m.id;
        materials_[id] = std::move(m);
    }

    bool contains(const std::string& id) const { return materials_.count(id) > 0; }

    const MaterialRecord& at(const std::string& id) const {
        auto it = materials_.find(id);
        if (it == materials_.end()) throw Error(ErrorCode::UnknownMaterial, id);
        return it->second;
    }

    MaterialRecord& at(const std::string& id) {
        auto it = materials_.find(id);
        if (it == materials_.end()) throw Error(ErrorCode::UnknownMaterial, id);
        return it->second;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, _] : materials_) out.push_back(id);
        return out;
    }

    std::vector<std::string> ids_with_role(Role r) const {
        std::vector<std::string> out;
        for (const auto& [id, m] : materials_)
            if (m.role == r) out.push_back(id);
        return out;
    }

    std::size_t size() const { return materials_.size(); }

private:
    std::map<std::string, MaterialRecord> materials_;
};

/// Formulation invariants including "at most one API component".
inline void validate_formulation(const Formulation& f, const MaterialLibrary& lib) {
    validate_formulation(f);
    int apis = 0;
    for (const auto& c : f.components)
        if (lib.at(c.material_id).role == Role::API) ++apis;
    if (apis > 1) throw Error(ErrorCode::MultipleApis, "formulation has " + std::to_string(apis) + " APIs");
}

/// API component of a formulation, if any.
inline std::optional<Component> api_component(const Formulation& f, const MaterialLibrary& lib) {
    for (const auto& c : f.components)
        if (lib.at(c.material_id).role == Role::API) return c;
    return std::nullopt;
}

/// Logarithmic particle-size grid (bin centers, um), shared by all materials.
inline std::vector<double> default_psd_grid(std::size_t bins = 40, double lo = 1.0, double hi = 1000.0) {
    std::vector<double> g(bins);
    const double step = std::log(hi / lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i < bins; ++i) g[i] = lo * std::exp((static_cast<double>(i) + 0.5) * step);
    return g;
}

/// Log-normal volume distribution matching d10/d50/d90, discretized on a
/// log grid by CDF differences between geometric bin edges.
inline Distribution psd_from_percentiles(double d10, double d50, double d90,
                                         const std::vector<double>& grid) {
    constexpr double z90 = 1.2815515655446004;
    const double mu = std::log(d50);
    const double s = std::max((std::log(d90) - std::log(d10)) / (2.0 * z90), 1e-3);
    const std::size_t n = grid.size();
    const double half = n > 1 ? 0.5 * std::log(grid[1] / grid[0]) : 0.5;
    auto cdf = [&](double x) { return 0.5 * std::erfc(-(std::log(x) - mu) / (s * std::sqrt(2.0))); };
    Distribution d{grid, std::vector<double>(n)};
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lo = i == 0 ? 0.0 : cdf(grid[i] * std::exp(-half));
        const double hi = i + 1 == n ? 1.0 : cdf(grid[i] * std::exp(half));
        d.mass[i] = hi - lo;
        total += d.mass[i];
    }
    for (auto& m : d.mass) m /= total;
    return d;
}

inline void normalize(Distribution& d) {
    const double t = d.total();
    if (t > 0.0)
        for (auto& m : d.mass) m /= t;
}

inline Role parse_role(const std::string& s) {
    if (s == "API" || s == "api") return Role::API;
    if (s == "filler") return Role::Filler;
    if (s == "lubricant") return Role::Lubricant;
    if (s == "disintegrant") return Role::Disintegrant;
    throw Error(ErrorCode::ParseError, "unknown role '" + s + "'");
}

namespace detail {

inline std::map<std::string, std::size_t> header_index(const std::string& header) {
    std::map<std::string, std::size_t> idx;
    const auto cols = io::split(header);
    for (std::size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = i;
    return idx;
}

inline std::size_t require_col(const std::map<std::string, std::size_t>& idx, const std::string& name,
                               const std::string& file) {
    auto it = idx.find(name);
    if (it == idx.end()) throw Error(ErrorCode::ParseError, file + ": missing column " + name);
    return it->second;
}

}  // namespace detail

/// Reads the characterisation CSV: id, grade, supplier, role, bulk_density,
/// tapped_density, true_density, ffc, ffc_pressure, d10, d50, d90.
/// PSDs are synthesized from the percentiles unless a grid sidecar is loaded later.
inline MaterialLibrary load_material_csv(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty file");
    const auto idx = detail::header_index(lines[0]);
    const std::string f = path.string();
    const auto c_id = detail::require_col(idx, "id", f);
    const auto c_role = detail::require_col(idx, "role", f);
    const auto c_bulk = detail::require_col(idx, "bulk_density", f);
    const auto c_tap = detail::require_col(idx, "tapped_density", f);
    const auto c_true = detail::require_col(idx, "true_density", f);
    const auto c_ffc = detail::require_col(idx, "ffc", f);
    const auto c_ffcp = detail::require_col(idx, "ffc_pressure", f);
    const auto c_d10 = detail::require_col(idx, "d10", f);
    const auto c_d50 = detail::require_col(idx, "d50", f);
    const auto c_d90 = detail::require_col(idx, "d90", f);
    const auto grid = default_psd_grid();

    MaterialLibrary lib;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = io::split(lines[i]);
        if (cols.size() < idx.size())
            throw Error(ErrorCode::ParseError, f + ": short row " + std::to_string(i));
        MaterialRecord m;
        m.id = cols[c_id];
        m.role = parse_role(cols[c_role]);
        m.bulk_density = io::parse_double(cols[c_bulk]);
        m.tapped_density = io::parse_double(cols[c_tap]);
        m.true_density = io::parse_double(cols[c_true]);
        m.ffc = io::parse_double(cols[c_ffc]);
        m.ffc_pressure = io::parse_double(cols[c_ffcp]);
        m.psd = psd_from_percentiles(io::parse_double(cols[c_d10]), io::parse_double(cols[c_d50]),
                                     io::parse_double(cols[c_d90]), grid);
        if (!(m.bulk_density > 0.0 && m.bulk_density <= m.tapped_density &&
              m.tapped_density <= m.true_density))
            throw Error(ErrorCode::ParseError, f + ": density ordering violated for " + m.id);
        lib.add(std::move(m));
    }
    return lib;
}

/// Descriptor table: header `api,<8 columns>`; rows for ids not in the
/// library are ignored.
inline void load_descriptor_csv(MaterialLibrary& lib, const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty file");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = io::split(lines[i]);
        if (cols.size() != kDescriptorCount + 1)
            throw Error(ErrorCode::ParseError, path.string() + ": expected " +
                                                   std::to_string(kDescriptorCount + 1) + " columns");
        if (!lib.contains(cols[0])) continue;
        std::vector<double> d;
        for (std::size_t j = 1; j < cols.size(); ++j) d.push_back(io::parse_double(cols[j]));
        lib.at(cols[0]).descriptors = std::move(d);
    }
}

enum class DistributionKind { Psd, AspectRatio };

/// Grid sidecar: first row `grid,<bin centers>`, then `<id>,<masses>`.
inline void load_distribution_csv(MaterialLibrary& lib, const std::filesystem::path& path,
                                  DistributionKind kind) {
    const auto lines = io::read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty file");
    auto head = io::split(lines[0]);
    if (head.empty() || head[0] != "grid")
        throw Error(ErrorCode::ParseError, path.string() + ": first row must start with 'grid'");
    std::vector<double> grid;
    for (std::size_t j = 1; j < head.size(); ++j) grid.push_back(io::parse_double(head[j]));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = io::split(lines[i]);
        if (cols.size() != grid.size() + 1)
            throw Error(ErrorCode::GridMismatch, path.string() + ": row " + cols[0]);
        if (!lib.contains(cols[0])) continue;
        Distribution d{grid, {}};
        for (std::size_t j = 1; j < cols.size(); ++j) d.mass.push_back(io::parse_double(cols[j]));
        normalize(d);
        auto& m = lib.at(cols[0]);
        (kind == DistributionKind::Psd ? m.psd : m.aspect_ratio) = std::move(d);
    }
}

/// Named blends, one per row: `B3,SP:0.20;CCS:0.035;...`.
inline std::map<std::string, Formulation> load_blend_csv(const std::filesystem::path& path) {
    std::map<std::string, Formulation> out;
    const auto lines = io::read_lines(path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = io::split(lines[i]);
        if (cols.size() != 2) throw Error(ErrorCode::ParseError, path.string() + ": bad row");
        Formulation f;
        for (const auto& part : io::split(cols[1], ';')) {
            const auto kv = io::split(part, ':');
            if (kv.size() != 2) throw Error(ErrorCode::ParseError, "bad component '" + part + "'");
            f.components.push_back({kv[0], io::parse_double(kv[1])});
        }
        out[cols[0]] = std::move(f);
    }
    return out;
}

struct LibraryPaths {
    std::filesystem::path materials;
    std::filesystem::path descriptors;   // optional
    std::filesystem::path aspect_ratio;  // optional
    std::filesystem::path psd;           // optional
};

inline MaterialLibrary load_library(const LibraryPaths& p) {
    auto lib = load_material_csv(p.materials);
    if (!p.descriptors.empty()) load_descriptor_csv(lib, p.descriptors);
    if (!p.psd.empty()) load_distribution_csv(lib, p.psd, DistributionKind::Psd);
    if (!p.aspect_ratio.empty()) load_distribution_csv(lib, p.aspect_ratio, DistributionKind::AspectRatio);
    return lib;
}

/// Library shipped in data/ (relative to a data directory).
inline MaterialLibrary load_fixture_library(const std::filesystem::path& data_dir) {
    return load_library({data_dir / "materials.csv", data_dir / "descriptors.csv",
                         data_dir / "aspect_ratio.csv", {}});
}

}  // namespace tabletlab
