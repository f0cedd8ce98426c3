#pragma once

// Material-to-product process models: ensembles of small ReLU networks that
// map blend, process and API descriptor features to porosity and ln(TS).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabletlab/core.hpp"
#include "tabletlab/error.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/log.hpp"
#include "tabletlab/materials.hpp"
#include "tabletlab/mixture.hpp"

namespace tabletlab::surrogate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr std::size_t kBlendFeatureCount = 12;
inline constexpr std::size_t kFeatureCount = kBlendFeatureCount + kDescriptorCount;
inline constexpr Eigen::Index kPressureFeature = 10;

inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n{"true_density", "bulk_density", "psd_pc1",  "psd_pc2", "psd_pc3",
                                   "ar_pc1",       "ar_pc2",       "ar_pc3",   "tapped_density",
                                   "ffc",          "pressure",     "api_concentration"};
        for (std::size_t i = 0; i < kDescriptorCount; ++i) n.push_back("descriptor_" + std::to_string(i + 1));
        return n;
    }();
    return names;
}

/// Concatenates the model inputs in the fixed order of feature_names().
/// `api` is null for a placebo blend.
inline VectorXd assemble_features(const mixture::BlendProperties& blend, const MaterialRecord* api, double loading,
                                  double pressure) {
    VectorXd x = VectorXd::Zero(static_cast<Eigen::Index>(kFeatureCount));
    x(0) = blend.true_density;
    x(1) = blend.bulk_density;
    for (int i = 0; i < 3; ++i) {
        x(2 + i) = blend.psd_pcs[static_cast<std::size_t>(i)];
        x(5 + i) = blend.ar_pcs[static_cast<std::size_t>(i)];
    }
    x(8) = blend.tapped_density;
    x(9) = blend.ffc;
    x(kPressureFeature) = pressure;
    x(11) = api ? loading : 0.0;
    if (api) {
        if (!api->descriptors || api->descriptors->size() != kDescriptorCount)
            throw Error(ErrorCode::MissingDescriptors, "no descriptor row for " + api->id);
        for (std::size_t i = 0; i < kDescriptorCount; ++i)
            x(static_cast<Eigen::Index>(kBlendFeatureCount + i)) = (*api->descriptors)[i];
    }
    if (!x.allFinite()) throw Error(ErrorCode::ShapeMismatch, "non-finite feature");
    return x;
}

/// Features for a formulation at a given main compression pressure.
inline VectorXd features_for(const Formulation& f, const mixture::MixtureModel& model, double pressure) {
    const auto blend = mixture::blend_properties(f, model);
    const auto api = api_component(f, model.library);
    if (!api) return assemble_features(blend, nullptr, 0.0, pressure);
    return assemble_features(blend, &model.library.at(api->material_id), api->fraction, pressure);
}

struct Dataset {
    MatrixXd features;  // rows x kFeatureCount
    VectorXd porosity;
    VectorXd tensile_strength;  // MPa
    std::vector<std::string> api;  // "placebo" for API-free rows

    Eigen::Index rows() const { return features.rows(); }

    void append(const VectorXd& x, double eps, double ts, const std::string& api_id) {
        const Eigen::Index n = rows();
        features.conservativeResize(n + 1, static_cast<Eigen::Index>(kFeatureCount));
        features.row(n) = x.transpose();
        porosity.conservativeResize(n + 1);
        porosity(n) = eps;
        tensile_strength.conservativeResize(n + 1);
        tensile_strength(n) = ts;
        api.push_back(api_id);
    }

    Dataset subset(const std::vector<Eigen::Index>& idx) const {
        Dataset d;
        d.features = features(idx, Eigen::all);
        d.porosity = porosity(idx);
        d.tensile_strength = tensile_strength(idx);
        for (auto i : idx) d.api.push_back(api[static_cast<std::size_t>(i)]);
        return d;
    }
};

inline std::string dataset_to_csv(const Dataset& d) {
    std::ostringstream out;
    for (const auto& n : feature_names()) out << n << ',';
    out << "porosity,tensile_strength,api\n";
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.features.cols(); ++j) out << io::fmt(d.features(i, j)) << ',';
        out << io::fmt(d.porosity(i)) << ',' << io::fmt(d.tensile_strength(i)) << ',' << d.api[static_cast<std::size_t>(i)]
            << '\n';
    }
    return out.str();
}

inline Dataset dataset_from_csv(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::ParseError, path.string() + ": empty dataset file");
    const auto header = io::split(lines.front());
    const std::size_t width = kFeatureCount + 3;
    if (header.size() != width) throw Error(ErrorCode::ParseError, path.string() + ": expected " + std::to_string(width) + " columns");
    Dataset d;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = io::split(lines[r]);
        if (cells.size() != width) throw Error(ErrorCode::ParseError, path.string() + ": bad row " + std::to_string(r));
        VectorXd x(static_cast<Eigen::Index>(kFeatureCount));
        for (std::size_t j = 0; j < kFeatureCount; ++j) x(static_cast<Eigen::Index>(j)) = io::parse_double(cells[j]);
        d.append(x, io::parse_double(cells[kFeatureCount]), io::parse_double(cells[kFeatureCount + 1]), cells[kFeatureCount + 2]);
    }
    return d;
}

enum class Target { Porosity, LogTensileStrength };

inline std::string to_string(Target t) { return t == Target::Porosity ? "porosity" : "log_tensile_strength"; }

struct TrainConfig {
    int ensemble_size = 20;
    std::vector<int> hidden{128, 128};
    int epochs = 60;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed_offset = 0;  // member i uses seed seed_offset + i
};

struct Scaler {
    VectorXd mean;
    VectorXd scale;

    static Scaler fit(const MatrixXd& x) {
        Scaler s;
        s.mean = x.colwise().mean().transpose();
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().mean());
            s.scale(j) = sd > 1e-12 ? sd : 1.0;
        }
        return s;
    }

    MatrixXd apply(const MatrixXd& x) const {
        return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
    }
};

/// Fully connected ReLU network with a linear scalar output.
struct Network {
    std::vector<MatrixXd> weights;  // layer l: out x in
    std::vector<VectorXd> biases;

    /// Columns of `x` are samples (standardized features).
    MatrixXd forward(const MatrixXd& x) const {
        MatrixXd a = x;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            MatrixXd z = weights[l] * a;
            z.colwise() += biases[l];
            if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
            a = std::move(z);
        }
        return a;
    }
};

struct EnsembleModel {
    Target target = Target::Porosity;
    Scaler x_scaler;
    double y_mean = 0.0;
    double y_scale = 1.0;
    std::vector<Network> members;
    std::vector<std::uint64_t> seeds;
    VectorXd feature_min;
    VectorXd feature_max;

    bool trained() const { return !members.empty(); }
};

namespace detail {

inline Network init_network(Eigen::Index inputs, const std::vector<int>& hidden, std::mt19937_64& rng) {
    Network net;
    Eigen::Index fan_in = inputs;
    std::vector<Eigen::Index> sizes(hidden.begin(), hidden.end());
    sizes.push_back(1);
    for (Eigen::Index out : sizes) {
        std::normal_distribution<double> g(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
        MatrixXd w(out, fan_in);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = g(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(VectorXd::Zero(out));
        fan_in = out;
    }
    return net;
}

struct Adam {
    std::vector<MatrixXd> mw, vw;
    std::vector<VectorXd> mb, vb;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;

    explicit Adam(const Network& n) {
        for (std::size_t l = 0; l < n.weights.size(); ++l) {
            mw.push_back(MatrixXd::Zero(n.weights[l].rows(), n.weights[l].cols()));
            vw.push_back(mw.back());
            mb.push_back(VectorXd::Zero(n.biases[l].size()));
            vb.push_back(mb.back());
        }
    }

    void update(Network& n, const std::vector<MatrixXd>& gw, const std::vector<VectorXd>& gb, double lr) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        const double a = lr * std::sqrt(c2) / c1;
        for (std::size_t l = 0; l < n.weights.size(); ++l) {
            mw[l] = beta1 * mw[l] + (1.0 - beta1) * gw[l];
            vw[l] = beta2 * vw[l] + (1.0 - beta2) * gw[l].cwiseAbs2();
            n.weights[l].array() -= a * mw[l].array() / (vw[l].array().sqrt() + eps);
            mb[l] = beta1 * mb[l] + (1.0 - beta1) * gb[l];
            vb[l] = beta2 * vb[l] + (1.0 - beta2) * gb[l].cwiseAbs2();
            n.biases[l].array() -= a * mb[l].array() / (vb[l].array().sqrt() + eps);
        }
    }
};

/// Mini-batch Adam on mean-squared error. `x` columns are samples.
inline Network train_member(const MatrixXd& x, const VectorXd& y, const TrainConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Network net = init_network(x.rows(), cfg.hidden, rng);
    Adam adam(net);
    const Eigen::Index n = x.cols();
    const std::size_t layers = net.weights.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<MatrixXd> acts(layers + 1), gw(layers);
    std::vector<VectorXd> gb(layers);
    const Eigen::Index batch = std::max<Eigen::Index>(1, cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index m = std::min(batch, n - start);
            std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + start + m);
            acts[0] = x(Eigen::all, idx);
            for (std::size_t l = 0; l < layers; ++l) {
                MatrixXd z = net.weights[l] * acts[l];
                z.colwise() += net.biases[l];
                if (l + 1 < layers) z = z.cwiseMax(0.0);
                acts[l + 1] = std::move(z);
            }
            MatrixXd delta = (acts[layers].row(0) - y(idx).transpose()) * (2.0 / static_cast<double>(m));
            for (std::size_t l = layers; l-- > 0;) {
                gw[l].noalias() = delta * acts[l].transpose();
                gb[l] = delta.rowwise().sum();
                if (l > 0) {
                    MatrixXd back = net.weights[l].transpose() * delta;
                    delta = (acts[l].array() > 0.0).select(back, 0.0);
                }
            }
            adam.update(net, gw, gb, cfg.learning_rate);
        }
    }
    return net;
}

}  // namespace detail

/// Trains `cfg.ensemble_size` members on identical data; member i is seeded
/// with cfg.seed_offset + i, which fixes both initialization and batch order.
inline EnsembleModel train_ensemble(const Dataset& data, Target target, const TrainConfig& cfg = {}) {
    if (data.rows() == 0) throw Error(ErrorCode::EmptyDataset, "no training rows");
    VectorXd y = target == Target::Porosity ? data.porosity : data.tensile_strength;
    if (target == Target::LogTensileStrength) {
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (!(y(i) > 0.0))
                throw Error(ErrorCode::NonPositiveTarget, "tensile strength " + io::fmt(y(i)) + " at row " + std::to_string(i));
            y(i) = std::log(y(i));
        }
    }
    EnsembleModel m;
    m.target = target;
    m.x_scaler = Scaler::fit(data.features);
    m.feature_min = data.features.colwise().minCoeff().transpose();
    m.feature_max = data.features.colwise().maxCoeff().transpose();
    m.y_mean = y.mean();
    const double sd = std::sqrt((y.array() - m.y_mean).square().mean());
    m.y_scale = sd > 1e-12 ? sd : 1.0;
    const MatrixXd xs = m.x_scaler.apply(data.features).transpose();
    const VectorXd ys = (y.array() - m.y_mean) / m.y_scale;
    for (int i = 0; i < cfg.ensemble_size; ++i) {
        const std::uint64_t seed = cfg.seed_offset + static_cast<std::uint64_t>(i);
        m.seeds.push_back(seed);
        m.members.push_back(detail::train_member(xs, ys, cfg, seed));
    }
    return m;
}

struct EnsemblePrediction {
    double mean = 0.0;  // porosity, or TS in MPa
    double std = 0.0;
    double log_mean = 0.0;  // ln(TS) space; equals mean/std for porosity
    double log_std = 0.0;
};

namespace detail {

// Shifted by the first member so identical members give exactly their value
// and a zero spread.
inline double shifted_mean(const VectorXd& v) { return v(0) + (v.array() - v(0)).mean(); }

inline double population_std(const VectorXd& v) {
    const VectorXd d = v.array() - v(0);
    return std::sqrt(std::max(0.0, d.array().square().mean() - d.mean() * d.mean()));
}

}  // namespace detail

/// Member outputs in model-target space (porosity or ln TS), one row per member.
inline MatrixXd member_outputs(const EnsembleModel& m, const MatrixXd& x) {
    if (!m.trained()) throw Error(ErrorCode::NotTrained, "ensemble has no members");
    if (x.cols() != m.x_scaler.mean.size()) throw Error(ErrorCode::ShapeMismatch, "feature width mismatch");
    const MatrixXd xs = m.x_scaler.apply(x).transpose();
    MatrixXd out(static_cast<Eigen::Index>(m.members.size()), x.rows());
    for (std::size_t k = 0; k < m.members.size(); ++k)
        out.row(static_cast<Eigen::Index>(k)) = (m.members[k].forward(xs).row(0).array() * m.y_scale + m.y_mean).matrix();
    return out;
}

/// Ensemble predictions for each row of `x`. For tensile strength every member
/// is back-transformed to MPa before the mean and population std are taken.
inline std::vector<EnsemblePrediction> predict(const EnsembleModel& m, const MatrixXd& x) {
    const MatrixXd out = member_outputs(m, x);
    static std::atomic<bool> warned{false};
    std::vector<EnsemblePrediction> preds(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double p = x(i, kPressureFeature);
        if ((p < m.feature_min(kPressureFeature) || p > m.feature_max(kPressureFeature)) && !warned.exchange(true))
            log().warn("pressure {} outside trained range [{}, {}]", p, m.feature_min(kPressureFeature),
                        m.feature_max(kPressureFeature));
        const VectorXd col = out.col(i);
        auto& r = preds[static_cast<std::size_t>(i)];
        r.log_mean = detail::shifted_mean(col);
        r.log_std = detail::population_std(col);
        if (m.target == Target::LogTensileStrength) {
            const VectorXd ts = col.array().exp();
            r.mean = detail::shifted_mean(ts);
            r.std = detail::population_std(ts);
        } else {
            r.mean = r.log_mean;
            r.std = r.log_std;
        }
    }
    return preds;
}

inline EnsemblePrediction predict(const EnsembleModel& m, const VectorXd& x) {
    return predict(m, MatrixXd(x.transpose())).front();
}

struct SurrogateModels {
    EnsembleModel porosity;
    EnsembleModel tensile_strength;
};

inline SurrogateModels train_surrogates(const Dataset& data, const TrainConfig& cfg = {}) {
    return {train_ensemble(data, Target::Porosity, cfg), train_ensemble(data, Target::LogTensileStrength, cfg)};
}

struct Metrics {
    double r2_porosity = 0.0;
    double rmse_porosity = 0.0;
    double r2_tensile_strength = 0.0;
    double rmse_tensile_strength = 0.0;  // MPa
    Eigen::Index rows = 0;
};

inline double r_squared(const VectorXd& y, const VectorXd& pred) {
    const double ss_tot = (y.array() - y.mean()).square().sum();
    const double ss_res = (y - pred).squaredNorm();
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
}

inline double rmse(const VectorXd& y, const VectorXd& pred) {
    return std::sqrt((y - pred).squaredNorm() / static_cast<double>(y.size()));
}

inline Metrics evaluate(const SurrogateModels& models, const Dataset& data) {
    if (data.rows() == 0) throw Error(ErrorCode::EmptyDataset, "no evaluation rows");
    const auto pe = predict(models.porosity, data.features);
    const auto pt = predict(models.tensile_strength, data.features);
    VectorXd eps(data.rows()), ts(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        eps(i) = pe[static_cast<std::size_t>(i)].mean;
        ts(i) = pt[static_cast<std::size_t>(i)].mean;
    }
    return {r_squared(data.porosity, eps), rmse(data.porosity, eps), r_squared(data.tensile_strength, ts),
            rmse(data.tensile_strength, ts), data.rows()};
}

struct HoldoutSplit {
    Dataset train;
    Dataset test;
};

inline HoldoutSplit split_by_api(const Dataset& data, const std::vector<std::string>& held_out) {
    const std::set<std::string> out(held_out.begin(), held_out.end());
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        (out.count(data.api[static_cast<std::size_t>(i)]) ? te : tr).push_back(i);
    if (te.empty()) throw Error(ErrorCode::HoldoutEmpty, "no rows for the held-out APIs");
    if (tr.empty()) throw Error(ErrorCode::EmptyDataset, "no rows left for training");
    return {data.subset(tr), data.subset(te)};
}

/// Trains on every API except `held_out` and scores the held-out rows.
inline Metrics evaluate_leave_api_out(const Dataset& data, const std::vector<std::string>& held_out,
                                      const TrainConfig& cfg = {}) {
    const auto split = split_by_api(data, held_out);
    return evaluate(train_surrogates(split.train, cfg), split.test);
}

// Text weight file: a header line, the scalers, then each member's layers.
inline std::string serialize(const EnsembleModel& m) {
    std::ostringstream out;
    auto vec = [&](const VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << io::fmt(v(i));
        out << '\n';
    };
    out << "tabletlab-ensemble 1\n";
    out << "target " << to_string(m.target) << '\n';
    out << "features " << m.x_scaler.mean.size() << '\n';
    vec(m.x_scaler.mean);
    vec(m.x_scaler.scale);
    vec(m.feature_min);
    vec(m.feature_max);
    out << "y " << io::fmt(m.y_mean) << ' ' << io::fmt(m.y_scale) << '\n';
    out << "members " << m.members.size() << '\n';
    for (std::size_t k = 0; k < m.members.size(); ++k) {
        const auto& net = m.members[k];
        out << "member " << m.seeds[k] << ' ' << net.weights.size() << '\n';
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            const auto& w = net.weights[l];
            out << "layer " << w.rows() << ' ' << w.cols() << '\n';
            for (Eigen::Index i = 0; i < w.rows(); ++i) vec(w.row(i).transpose());
            vec(net.biases[l]);
        }
    }
    return out.str();
}

inline EnsembleModel deserialize(const std::string& text) {
    std::istringstream in(text);
    auto fail = [](const std::string& what) { return Error(ErrorCode::ParseError, "weight file: " + what); };
    std::string word;
    auto expect = [&](const std::string& w) {
        if (!(in >> word) || word != w) throw fail("expected '" + w + "'");
    };
    auto number = [&] {
        if (!(in >> word)) throw fail("truncated");
        return io::parse_double(word);
    };
    auto count = [&] {
        long v = 0;
        if (!(in >> v) || v < 0) throw fail("bad count");
        return static_cast<Eigen::Index>(v);
    };
    auto vec = [&](Eigen::Index n) {
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = number();
        return v;
    };
    expect("tabletlab-ensemble");
    expect("1");
    EnsembleModel m;
    expect("target");
    in >> word;
    if (word == "porosity") m.target = Target::Porosity;
    else if (word == "log_tensile_strength") m.target = Target::LogTensileStrength;
    else throw fail("unknown target " + word);
    expect("features");
    const Eigen::Index nf = count();
    m.x_scaler.mean = vec(nf);
    m.x_scaler.scale = vec(nf);
    m.feature_min = vec(nf);
    m.feature_max = vec(nf);
    expect("y");
    m.y_mean = number();
    m.y_scale = number();
    expect("members");
    const Eigen::Index nm = count();
    for (Eigen::Index k = 0; k < nm; ++k) {
        expect("member");
        std::uint64_t seed = 0;
        if (!(in >> seed)) throw fail("bad seed");
        m.seeds.push_back(seed);
        const Eigen::Index layers = count();
        Network net;
        for (Eigen::Index l = 0; l < layers; ++l) {
            expect("layer");
            const Eigen::Index r = count(), c = count();
            MatrixXd w(r, c);
            for (Eigen::Index i = 0; i < r; ++i)
                for (Eigen::Index j = 0; j < c; ++j) w(i, j) = number();
            net.weights.push_back(std::move(w));
            net.biases.push_back(vec(r));
        }
        m.members.push_back(std::move(net));
    }
    return m;
}

inline void save(const EnsembleModel& m, const std::filesystem::path& path) { io::write_file(path, serialize(m)); }
inline EnsembleModel load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

}  // namespace tabletlab::surrogate
