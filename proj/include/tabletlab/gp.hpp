#pragma once

// Gaussian-process regression with an ARD Matern-5/2 kernel, expected
// improvement, Latin hypercube designs and grid-based acquisition search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabletlab/error.hpp"
#include "tabletlab/optim.hpp"

namespace tabletlab::gp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
};
using Bounds = std::vector<Interval>;

inline void check_bounds(const Bounds& bounds) {
    if (bounds.empty()) throw Error(ErrorCode::InvalidBounds, "no dimensions");
    for (const auto& b : bounds)
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.hi > b.lo))
            throw Error(ErrorCode::InvalidBounds, "[" + std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
}

struct Hyperparameters {
    double signal_variance = 1.0;
    VectorXd length_scales;
    double noise_variance = 1e-6;
};

struct GpConfig {
    double jitter = 1e-8;
    std::vector<double> start_length_scales{0.1, 0.3, 1.0};
    std::vector<double> start_noise{1e-6, 1e-2};
    int random_starts = 2;
    std::uint64_t seed = 0;
    int max_evaluations = 300;
    double min_length_scale = 5e-3;
    double max_length_scale = 20.0;
    double min_signal_variance = 1e-3;
    double max_signal_variance = 1e3;
    double max_noise_variance = 1.0;
};

struct GpState {
    Bounds bounds;
    MatrixXd inputs;   // unit cube
    VectorXd targets;  // standardized
    double target_mean = 0.0;
    double target_scale = 1.0;
    Hyperparameters hyper;
    MatrixXd chol;  // lower Cholesky factor of K + noise I
    VectorXd alpha;
    double log_likelihood = 0.0;
    bool degenerate = false;

    bool fitted() const { return inputs.rows() > 0; }
    Eigen::Index dims() const { return static_cast<Eigen::Index>(bounds.size()); }
};

struct Prediction {
    double mean = 0.0;
    double std = 0.0;
};

enum class Direction { Minimize, Maximize };

namespace detail {

inline double matern52(double r) {
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

inline MatrixXd kernel(const MatrixXd& a, const MatrixXd& b, const Hyperparameters& h) {
    MatrixXd k(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            const double r = ((a.row(i) - b.row(j)).transpose().array() / h.length_scales.array()).matrix().norm();
            k(i, j) = h.signal_variance * matern52(r);
        }
    return k;
}

struct Factorization {
    MatrixXd chol;
    VectorXd alpha;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    bool ok = false;
};

inline Factorization factorize(const MatrixXd& x, const VectorXd& y, const Hyperparameters& h) {
    Factorization f;
    MatrixXd k = kernel(x, x, h);
    k.diagonal().array() += h.noise_variance;
    Eigen::LLT<MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) return f;
    f.chol = llt.matrixL();
    f.alpha = llt.solve(y);
    const double n = static_cast<double>(y.size());
    f.log_likelihood = -0.5 * y.dot(f.alpha) - f.chol.diagonal().array().log().sum() -
                       0.5 * n * std::log(2.0 * std::numbers::pi);
    f.ok = std::isfinite(f.log_likelihood);
    return f;
}

inline VectorXd normalize(const VectorXd& x, const Bounds& bounds) {
    VectorXd u(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const auto& b = bounds[static_cast<std::size_t>(j)];
        u(j) = (x(j) - b.lo) / b.width();
    }
    return u;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// Log marginal likelihood of the state's standardized targets under `h`.
inline double log_marginal_likelihood(const GpState& s, const Hyperparameters& h) {
    return detail::factorize(s.inputs, s.targets, h).log_likelihood;
}

inline Bounds bounds_from_data(const MatrixXd& points) {
    Bounds b(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
        double lo = points.col(j).minCoeff(), hi = points.col(j).maxCoeff();
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
        b[static_cast<std::size_t>(j)] = {lo, hi};
    }
    return b;
}

/// Fits hyperparameters by maximizing the log marginal likelihood from a fixed
/// grid of starts plus `random_starts` seeded ones. Inputs are scaled to the
/// unit cube of `bounds` (data range when empty); targets are standardized.
inline GpState fit_gp(const MatrixXd& points, const VectorXd& targets, const GpConfig& cfg = {}, Bounds bounds = {}) {
    if (points.rows() == 0 || targets.size() == 0) throw Error(ErrorCode::EmptyData, "no training points");
    if (points.rows() != targets.size()) throw Error(ErrorCode::ShapeMismatch, "points/targets length mismatch");
    if (!points.allFinite() || !targets.allFinite()) throw Error(ErrorCode::EmptyData, "non-finite training data");
    if (bounds.empty()) bounds = bounds_from_data(points);
    check_bounds(bounds);
    if (static_cast<Eigen::Index>(bounds.size()) != points.cols())
        throw Error(ErrorCode::ShapeMismatch, "bounds/points dimension mismatch");

    GpState s;
    s.bounds = std::move(bounds);
    const Eigen::Index n = points.rows(), d = points.cols();
    s.inputs.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) s.inputs.row(i) = detail::normalize(points.row(i).transpose(), s.bounds);

    s.target_mean = targets.mean();
    const double sd = std::sqrt((targets.array() - s.target_mean).square().mean());
    s.degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(s.target_mean)));
    s.target_scale = s.degenerate ? 1.0 : sd;
    s.targets = (targets.array() - s.target_mean) / s.target_scale;

    Hyperparameters best;
    best.length_scales = VectorXd::Constant(d, 0.3);
    best.signal_variance = 1.0;
    best.noise_variance = cfg.jitter;

    if (!s.degenerate) {
        const double lo_l = std::log(cfg.min_length_scale), hi_l = std::log(cfg.max_length_scale);
        const double lo_s = std::log(cfg.min_signal_variance), hi_s = std::log(cfg.max_signal_variance);
        const double lo_n = std::log(cfg.jitter), hi_n = std::log(cfg.max_noise_variance);
        auto unpack = [&](const VectorXd& theta, double& penalty) {
            Hyperparameters h;
            h.length_scales.resize(d);
            penalty = 0.0;
            auto clamp = [&](double v, double lo, double hi) {
                const double c = std::clamp(v, lo, hi);
                penalty += (v - c) * (v - c);
                return c;
            };
            h.signal_variance = std::exp(clamp(theta(0), lo_s, hi_s));
            for (Eigen::Index j = 0; j < d; ++j) h.length_scales(j) = std::exp(clamp(theta(1 + j), lo_l, hi_l));
            h.noise_variance = std::exp(clamp(theta(1 + d), lo_n, hi_n));
            return h;
        };
        auto objective = [&](const VectorXd& theta) {
            double penalty = 0.0;
            const auto h = unpack(theta, penalty);
            const auto f = detail::factorize(s.inputs, s.targets, h);
            return (f.ok ? -f.log_likelihood : 1e25) + 1e3 * penalty;
        };

        std::vector<VectorXd> starts;
        for (double l : cfg.start_length_scales)
            for (double nv : cfg.start_noise) {
                VectorXd t(d + 2);
                t(0) = 0.0;
                t.segment(1, d).setConstant(std::log(l));
                t(1 + d) = std::log(std::max(nv, cfg.jitter));
                starts.push_back(t);
            }
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int r = 0; r < cfg.random_starts; ++r) {
            VectorXd t(d + 2);
            t(0) = lo_s + (hi_s - lo_s) * u(rng);
            for (Eigen::Index j = 0; j < d; ++j) t(1 + j) = lo_l + (hi_l - lo_l) * u(rng);
            t(1 + d) = lo_n + (hi_n - lo_n) * u(rng);
            starts.push_back(t);
        }

        double best_value = std::numeric_limits<double>::infinity();
        optim::NelderMeadOptions opt;
        opt.max_evaluations = cfg.max_evaluations;
        for (const auto& t : starts) {
            const auto m = optim::nelder_mead(objective, t, opt);
            if (m.value < best_value) {
                best_value = m.value;
                double penalty = 0.0;
                best = unpack(m.x, penalty);
            }
        }
    }

    auto f = detail::factorize(s.inputs, s.targets, best);
    // Raise the noise until the factorization succeeds; only hit on near-duplicate inputs.
    while (!f.ok && best.noise_variance < 1.0) {
        best.noise_variance = std::max(best.noise_variance * 10.0, cfg.jitter);
        f = detail::factorize(s.inputs, s.targets, best);
    }
    if (!f.ok) throw Error(ErrorCode::SingularFit, "kernel matrix not positive definite");
    s.hyper = best;
    s.chol = std::move(f.chol);
    s.alpha = std::move(f.alpha);
    s.log_likelihood = f.log_likelihood;
    return s;
}

/// Posterior mean and latent-function standard deviation at each row of `points`
/// (native units).
inline std::vector<Prediction> gp_posterior(const GpState& s, const MatrixXd& points) {
    if (!s.fitted()) throw Error(ErrorCode::NotFitted, "GP has no training data");
    if (points.cols() != s.dims()) throw Error(ErrorCode::ShapeMismatch, "query dimension mismatch");
    MatrixXd u(points.rows(), points.cols());
    for (Eigen::Index i = 0; i < points.rows(); ++i) u.row(i) = detail::normalize(points.row(i).transpose(), s.bounds);
    const MatrixXd ks = detail::kernel(u, s.inputs, s.hyper);
    const VectorXd mean = ks * s.alpha;
    const MatrixXd v = s.chol.triangularView<Eigen::Lower>().solve(ks.transpose());
    std::vector<Prediction> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double var = std::max(0.0, s.hyper.signal_variance - v.col(i).squaredNorm());
        out[static_cast<std::size_t>(i)] = {s.target_mean + s.target_scale * mean(i), s.target_scale * std::sqrt(var)};
    }
    return out;
}

inline Prediction gp_posterior(const GpState& s, const VectorXd& x) {
    return gp_posterior(s, MatrixXd(x.transpose())).front();
}

/// Closed-form EI of a Gaussian with the given mean and std against `best`.
inline double expected_improvement(double mean, double std, double best, Direction dir) {
    if (std < 1e-12) return std::max(0.0, dir == Direction::Minimize ? best - mean : mean - best);
    const double gain = dir == Direction::Minimize ? best - mean : mean - best;
    const double z = gain / std;
    return std::max(0.0, gain * detail::normal_cdf(z) + std * detail::normal_pdf(z));
}

inline double expected_improvement(const GpState& s, const VectorXd& x, double best, Direction dir) {
    const auto p = gp_posterior(s, x);
    return expected_improvement(p.mean, p.std, best, dir);
}

/// One sample per equal stratum in every column, jittered uniformly inside it.
inline MatrixXd lhs_design(int n, const Bounds& bounds, std::uint64_t seed) {
    check_bounds(bounds);
    if (n < 1) throw Error(ErrorCode::EmptyData, "LHS needs at least one point");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto d = static_cast<Eigen::Index>(bounds.size());
    MatrixXd out(n, d);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < d; ++j) {
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            std::uniform_int_distribution<int> pick(0, i);
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
        }
        const auto& b = bounds[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            const double t = (perm[static_cast<std::size_t>(i)] + u(rng)) / n;
            out(i, j) = b.lo + t * b.width();
        }
    }
    return out;
}

struct GridOptions {
    int per_dimension = 512;
    int max_points = 8192;
    bool refine = true;
};

/// Points per axis used by the acquisition grid for `dims` dimensions.
inline int grid_resolution(std::size_t dims, const GridOptions& opt = {}) {
    int r = opt.per_dimension;
    while (r > 1 && std::pow(static_cast<double>(r), static_cast<double>(dims)) > opt.max_points) --r;
    return r;
}

/// Regular grid including both endpoints of every interval (the midpoint when
/// the resolution is 1). Rows are ordered with the first dimension fastest.
inline MatrixXd regular_grid(const Bounds& bounds, int resolution) {
    check_bounds(bounds);
    const auto d = static_cast<Eigen::Index>(bounds.size());
    Eigen::Index total = 1;
    for (Eigen::Index j = 0; j < d; ++j) total *= resolution;
    MatrixXd g(total, d);
    for (Eigen::Index i = 0; i < total; ++i) {
        Eigen::Index rest = i;
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto k = rest % resolution;
            rest /= resolution;
            const auto& b = bounds[static_cast<std::size_t>(j)];
            const double t = resolution == 1 ? 0.5 : static_cast<double>(k) / (resolution - 1);
            g(i, j) = b.lo + t * b.width();
        }
    }
    return g;
}

struct Maximum {
    VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
};

/// Maximizes `f` over the box: dense grid, then a simplex search from the best
/// grid cell kept inside the box. Ties keep the lowest grid index.
inline Maximum maximize_on_box(const std::function<double(const VectorXd&)>& f, const Bounds& bounds,
                               const GridOptions& opt = {}) {
    const int r = grid_resolution(bounds.size(), opt);
    const MatrixXd grid = regular_grid(bounds, r);
    Maximum best;
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        const VectorXd x = grid.row(i).transpose();
        const double v = f(x);
        if (v > best.value) best = {x, v};
    }
    if (!opt.refine || best.x.size() == 0) return best;

    const auto d = static_cast<Eigen::Index>(bounds.size());
    auto to_native = [&](const VectorXd& u) {
        VectorXd x(d);
        for (Eigen::Index j = 0; j < d; ++j) {
            const auto& b = bounds[static_cast<std::size_t>(j)];
            x(j) = b.lo + std::clamp(u(j), 0.0, 1.0) * b.width();
        }
        return x;
    };
    const VectorXd start = detail::normalize(best.x, bounds);
    optim::NelderMeadOptions nm;
    nm.initial_step = r > 1 ? 1.0 / (r - 1) : 0.25;
    nm.max_evaluations = 60 * static_cast<int>(d);
    nm.x_tolerance = 1e-6;
    const auto m = optim::nelder_mead([&](const VectorXd& u) { return -f(to_native(u)); }, start, nm);
    if (-m.value > best.value) best = {to_native(m.x), -m.value};
    return best;
}

}  // namespace tabletlab::gp
