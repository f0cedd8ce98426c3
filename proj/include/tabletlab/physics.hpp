#pragma once

// Compressibility (Kawakita, grouped single-parameter porosity form) and
// compactability (Ryshkewitch-Duckworth) models with their least-squares fits.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tabletlab/error.hpp"

namespace tabletlab::physics {

struct KawakitaParams {
    double eps0 = 0.5;  // initial powder-bed porosity
    double B = 0.01;    // 1/MPa
};

struct RyshDuckParams {
    double T_hat = 10.0;  // MPa, strength at zero porosity
    double k_b = 10.0;    // bonding capacity
};

struct CompressionPoint {
    double pressure;  // MPa
    double porosity;
};

struct StrengthPoint {
    double porosity;
    double strength;  // MPa
};

/// eps(P) = eps0 / (1 + B P)
inline double kawakita_porosity(double pressure, const KawakitaParams& k) {
    if (pressure < 0.0) throw Error(ErrorCode::NegativePressure, "P = " + std::to_string(pressure));
    return k.eps0 / (1.0 + k.B * pressure);
}

inline double kawakita_pressure_for_porosity(double eps_target, const KawakitaParams& k) {
    if (!(eps_target > 0.0))
        throw Error(ErrorCode::PorosityOutOfRange, "target porosity must be > 0");
    if (eps_target > k.eps0)
        throw Error(ErrorCode::TargetAboveInitialPorosity,
                    std::to_string(eps_target) + " > eps0 " + std::to_string(k.eps0));
    if (eps_target == k.eps0) return 0.0;
    if (!(k.B > 0.0)) throw Error(ErrorCode::DegenerateB, "B = 0 cannot reach a lower porosity");
    return (k.eps0 / eps_target - 1.0) / k.B;
}

/// sigma(eps) = T_hat exp(-k_b eps)
inline double rd_tensile_strength(double eps, const RyshDuckParams& r) {
    if (!(eps >= 0.0 && eps < 1.0))
        throw Error(ErrorCode::PorosityOutOfRange, "eps = " + std::to_string(eps));
    return r.T_hat * std::exp(-r.k_b * eps);
}

namespace detail {

struct LineFit {
    double intercept;
    double slope;
};

// Ordinary least squares y = a + b x; throws SingularFit when x is constant.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorCode::SingularFit, "regressor has no spread");
    const double b = sxy / sxx;
    return {my - b * mx, b};
}

inline double kawakita_sse(std::span<const CompressionPoint> data, const KawakitaParams& k) {
    double s = 0.0;
    for (const auto& p : data) {
        const double r = p.porosity - k.eps0 / (1.0 + k.B * p.pressure);
        s += r * r;
    }
    return s;
}

}  // namespace detail

/// Least-squares fit in porosity space. Seeded by the reciprocal
/// linearization 1/eps = (1/eps0)(1 + B P), refined by Levenberg-Marquardt
/// with B kept >= 0.
inline KawakitaParams fit_kawakita(std::span<const CompressionPoint> data) {
    if (data.size() < 2) throw Error(ErrorCode::InsufficientData, "need >= 2 points");
    std::vector<double> x, y;
    for (const auto& p : data) {
        if (!(p.porosity > 0.0))
            throw Error(ErrorCode::PorosityOutOfRange, "porosity must be > 0 for Kawakita fit");
        x.push_back(p.pressure);
        y.push_back(1.0 / p.porosity);
    }
    const auto lf = detail::ols(x, y);

    KawakitaParams k;
    if (lf.intercept > 0.0 && lf.slope > 0.0) {
        k = {1.0 / lf.intercept, lf.slope / lf.intercept};
    } else {
        double mean = 0.0;
        for (const auto& p : data) mean += p.porosity;
        k = {mean / static_cast<double>(data.size()), 0.0};
    }

    double sse = detail::kawakita_sse(data, k);
    double lambda = 1e-3;
    for (int iter = 0; iter < 200 && sse > 0.0; ++iter) {
        // Normal equations of the 2-parameter Gauss-Newton step.
        double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
        for (const auto& p : data) {
            const double d = 1.0 + k.B * p.pressure;
            const double r = p.porosity - k.eps0 / d;
            const double j1 = 1.0 / d;
            const double j2 = -k.eps0 * p.pressure / (d * d);
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            const double m11 = a11 * (1.0 + lambda), m22 = a22 * (1.0 + lambda);
            const double det = m11 * m22 - a12 * a12;
            if (!(std::abs(det) > 0.0)) break;
            KawakitaParams trial{k.eps0 + (m22 * g1 - a12 * g2) / det,
                                 std::max(0.0, k.B + (m11 * g2 - a12 * g1) / det)};
            const double trial_sse = detail::kawakita_sse(data, trial);
            if (trial_sse < sse) {
                const double rel = std::abs(trial.eps0 - k.eps0) / std::max(k.eps0, 1e-12) +
                                   std::abs(trial.B - k.B) / std::max(k.B, 1e-12);
                k = trial;
                sse = trial_sse;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
    return k;
}

/// Log-linear OLS: ln sigma = ln T_hat - k_b eps.
inline RyshDuckParams fit_rd(std::span<const StrengthPoint> data) {
    if (data.size() < 2) throw Error(ErrorCode::InsufficientData, "need >= 2 points");
    std::vector<double> x, y;
    for (const auto& p : data) {
        if (!(p.strength > 0.0))
            throw Error(ErrorCode::NonPositiveStrength, "sigma = " + std::to_string(p.strength));
        x.push_back(p.porosity);
        y.push_back(std::log(p.strength));
    }
    const auto lf = detail::ols(x, y);
    return {std::exp(lf.intercept), -lf.slope};
}

inline double model_rmse(const KawakitaParams& k, std::span<const CompressionPoint> data) {
    if (data.empty()) throw Error(ErrorCode::EmptyData, "rmse of empty data");
    return std::sqrt(detail::kawakita_sse(data, k) / static_cast<double>(data.size()));
}

inline double model_rmse(const RyshDuckParams& r, std::span<const StrengthPoint> data) {
    if (data.empty()) throw Error(ErrorCode::EmptyData, "rmse of empty data");
    double s = 0.0;
    for (const auto& p : data) {
        const double e = p.strength - r.T_hat * std::exp(-r.k_b * p.porosity);
        s += e * e;
    }
    return std::sqrt(s / static_cast<double>(data.size()));
}

}  // namespace tabletlab::physics
