#pragma once

// NIR chemometrics: spectral preprocessing (trim, SNV, Savitzky-Golay), PCA
// with Hotelling T^2 monitoring, NIPALS PLS regression with k-fold
// cross-validation, and direct standardization between measurement domains.

#include <algorithm>
#include <concepts>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include "tabletlab/error.hpp"
#include "tabletlab/io.hpp"
#include "tabletlab/log.hpp"

namespace tabletlab::chemo {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

enum class SpectrumKind { Blend, Tablet, Dark, Reference };

inline std::string to_string(SpectrumKind k) {
    switch (k) {
    case SpectrumKind::Blend: return "blend";
    case SpectrumKind::Tablet: return "tablet";
    case SpectrumKind::Dark: return "dark";
    case SpectrumKind::Reference: return "reference";
    }
    return "?";
}

inline SpectrumKind parse_spectrum_kind(const std::string& s) {
    if (s == "blend") return SpectrumKind::Blend;
    if (s == "tablet") return SpectrumKind::Tablet;
    if (s == "dark") return SpectrumKind::Dark;
    if (s == "reference") return SpectrumKind::Reference;
    throw Error(ErrorCode::ParseError, "unknown spectrum kind '" + s + "'");
}

struct Spectrum {
    std::vector<double> wavelengths;  // nm, strictly increasing
    std::vector<double> absorbances;
    int iteration = 0;
    SpectrumKind kind = SpectrumKind::Blend;

    std::size_t size() const { return absorbances.size(); }
};

/// Default acquisition grid, 908-1676 nm at 4 nm spacing.
inline std::vector<double> default_nir_grid(double lo = 908.0, double hi = 1676.0, double step = 4.0) {
    std::vector<double> g;
    for (double w = lo; w <= hi + 1e-9; w += step) g.push_back(w);
    return g;
}

// ---------------------------------------------------------------- preprocessing

inline Spectrum trim(const Spectrum& s, double lo, double hi) {
    if (!(lo < hi)) throw Error(ErrorCode::EmptyRange, "lo must be < hi");
    Spectrum out{{}, {}, s.iteration, s.kind};
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.wavelengths[i] >= lo && s.wavelengths[i] <= hi) {
            out.wavelengths.push_back(s.wavelengths[i]);
            out.absorbances.push_back(s.absorbances[i]);
        }
    }
    if (out.absorbances.empty())
        throw Error(ErrorCode::EmptyRange, "no channels in [" + io::fmt(lo) + ", " + io::fmt(hi) + "]");
    return out;
}

/// Standard normal variate with the sample (n-1) standard deviation.
inline Spectrum snv(const Spectrum& s) {
    const std::size_t n = s.size();
    if (n < 2) throw Error(ErrorCode::ZeroVariance, "SNV needs >= 2 channels");
    const double mean = std::accumulate(s.absorbances.begin(), s.absorbances.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : s.absorbances) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0) || sd <= 1e-14 * std::max(1.0, std::abs(mean)))
        throw Error(ErrorCode::ZeroVariance, "constant spectrum");
    Spectrum out = s;
    for (auto& a : out.absorbances) a = (a - mean) / sd;
    return out;
}

/// Savitzky-Golay weights: row t (offset -half..half from the window
/// center) gives the derivative of the local least-squares polynomial
/// evaluated at that offset, for unit sample spacing.
inline MatrixXd savgol_weights(int window, int polyorder, int deriv) {
    const int half = window / 2;
    MatrixXd V(window, polyorder + 1);
    for (int i = 0; i < window; ++i)
        for (int k = 0; k <= polyorder; ++k) V(i, k) = std::pow(static_cast<double>(i - half), k);
    // Coefficients a = pinv(V) y
    const MatrixXd pinv = V.colPivHouseholderQr().solve(MatrixXd::Identity(window, window));
    MatrixXd W(window, window);
    for (int t = -half; t <= half; ++t) {
        RowVectorXd d = RowVectorXd::Zero(polyorder + 1);
        for (int k = deriv; k <= polyorder; ++k) {
            double c = 1.0;
            for (int j = 0; j < deriv; ++j) c *= static_cast<double>(k - j);
            d(k) = c * std::pow(static_cast<double>(t), k - deriv);
        }
        W.row(t + half) = d * pinv;
    }
    return W;
}

/// Savitzky-Golay smoothing/differentiation of uniformly spaced samples.
/// Edge points use the polynomial fitted to the first/last full window.
/// Even windows are rounded up to the next odd size.
inline VectorXd savgol_filter(const VectorXd& y, int window, int polyorder, int deriv, double spacing = 1.0) {
    // The requested window must already exceed the order; rounding up is not
    // allowed to rescue an undersized window.
    if (polyorder < 0 || deriv < 0 || window <= polyorder)
        throw Error(ErrorCode::WindowTooSmall,
                    "window " + std::to_string(window) + " must exceed polyorder " + std::to_string(polyorder));
    if (window % 2 == 0) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true))
            log().warn("Savitzky-Golay window {} is even; using {}", window, window + 1);
        ++window;
    }
    if (deriv > polyorder) return VectorXd::Zero(y.size());
    const int n = static_cast<int>(y.size());
    if (n < window)
        throw Error(ErrorCode::WindowTooSmall,
                    "signal of " + std::to_string(n) + " points shorter than window " + std::to_string(window));
    const int half = window / 2;
    const MatrixXd W = savgol_weights(window, polyorder, deriv);
    const double scale = 1.0 / std::pow(spacing, deriv);
    VectorXd out(n);
    for (int i = 0; i < n; ++i) {
        const int start = std::clamp(i - half, 0, n - window);
        const int t = i - (start + half);
        out(i) = scale * W.row(t + half).dot(y.segment(start, window));
    }
    return out;
}

inline Spectrum savgol(const Spectrum& s, int window, int polyorder, int deriv) {
    double spacing = 1.0;
    if (s.size() >= 2) {
        spacing = s.wavelengths[1] - s.wavelengths[0];
        for (std::size_t i = 2; i < s.size(); ++i) {
            const double d = s.wavelengths[i] - s.wavelengths[i - 1];
            if (std::abs(d - spacing) > 1e-6 * std::abs(spacing))
                throw Error(ErrorCode::GridMismatch, "Savitzky-Golay needs a uniform wavelength grid");
        }
    }
    const VectorXd y = Eigen::Map<const VectorXd>(s.absorbances.data(), s.size());
    const VectorXd f = savgol_filter(y, window, polyorder, deriv, spacing);
    Spectrum out = s;
    out.absorbances.assign(f.data(), f.data() + f.size());
    return out;
}

struct Preprocessing {
    double trim_lo = 1050.0;
    double trim_hi = 1450.0;
    int sg_window = 8;
    int sg_polyorder = 2;
    int sg_deriv = 1;
};

inline Spectrum preprocess(const Spectrum& s, const Preprocessing& p) {
    return savgol(snv(trim(s, p.trim_lo, p.trim_hi)), p.sg_window, p.sg_polyorder, p.sg_deriv);
}

/// Stacks spectra as rows.
inline MatrixXd to_matrix(const std::vector<Spectrum>& spectra) {
    if (spectra.empty()) return {};
    const auto p = static_cast<Eigen::Index>(spectra.front().size());
    MatrixXd X(static_cast<Eigen::Index>(spectra.size()), p);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        if (static_cast<Eigen::Index>(spectra[i].size()) != p)
            throw Error(ErrorCode::ShapeMismatch, "spectra have different lengths");
        X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const RowVectorXd>(spectra[i].absorbances.data(), p);
    }
    return X;
}

// ---------------------------------------------------------------- PCA

struct PcaModel {
    RowVectorXd mean;
    MatrixXd loadings;          // p x k, orthonormal columns
    VectorXd variances;         // lambda_j, descending
    VectorXd explained_ratio;   // lambda_j / total variance
    double total_variance = 0.0;
    int k = 0;
    bool truncated = false;
};

/// Mean-centered SVD. Rows of X are samples. Each loading's largest-magnitude
/// entry is made positive so results do not depend on the SVD's sign choice.
inline PcaModel pca_fit(const MatrixXd& X, int k) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (n < 2 || p < 1) throw Error(ErrorCode::TooFewSamples, "PCA needs >= 2 samples");
    PcaModel m;
    m.mean = X.colwise().mean();
    const MatrixXd Xc = X.rowwise() - m.mean;
    Eigen::BDCSVD<MatrixXd> svd(Xc, Eigen::ComputeThinV);
    const VectorXd s = svd.singularValues();
    const double denom = static_cast<double>(n - 1);
    m.total_variance = s.squaredNorm() / denom;

    int rank = 0;
    const double tol = (s.size() > 0 ? s(0) : 0.0) * 1e-12 * static_cast<double>(std::max(n, p));
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (s(j) > tol) ++rank;
    const int cap = std::min<int>(rank, static_cast<int>(std::min<Eigen::Index>(n - 1, p)));
    if (k > cap) {
        log().warn("PCA: {} components requested, data supports {}; truncating", k, cap);
        m.truncated = true;
        k = cap;
    }
    if (k < 1) throw Error(ErrorCode::ZeroVarianceComponent, "data has no variance");
    m.k = k;
    m.loadings = svd.matrixV().leftCols(k);
    for (int j = 0; j < k; ++j) {
        Eigen::Index idx;
        m.loadings.col(j).cwiseAbs().maxCoeff(&idx);
        if (m.loadings(idx, j) < 0.0) m.loadings.col(j) *= -1.0;
    }
    m.variances = s.head(k).array().square() / denom;
    m.explained_ratio = m.total_variance > 0.0 ? VectorXd(m.variances / m.total_variance) : VectorXd::Zero(k);
    return m;
}

inline VectorXd pca_project(const PcaModel& m, const VectorXd& x) {
    if (x.size() != m.mean.size()) throw Error(ErrorCode::ShapeMismatch, "PCA input length");
    return m.loadings.transpose() * (x - m.mean.transpose());
}

inline MatrixXd pca_project(const PcaModel& m, const MatrixXd& X) {
    if (X.cols() != m.mean.size()) throw Error(ErrorCode::ShapeMismatch, "PCA input width");
    return (X.rowwise() - m.mean) * m.loadings;
}

inline VectorXd pca_reconstruct(const PcaModel& m, const VectorXd& scores) {
    return m.mean.transpose() + m.loadings * scores;
}

/// T^2 = sum_j t_j^2 / lambda_j
inline double hotelling_t2(const PcaModel& m, const VectorXd& scores) {
    if (scores.size() != m.k) throw Error(ErrorCode::ShapeMismatch, "score count != k");
    double t2 = 0.0;
    for (int j = 0; j < m.k; ++j) {
        if (!(m.variances(j) > 0.0)) throw Error(ErrorCode::ZeroVarianceComponent, "lambda_" + std::to_string(j));
        t2 += scores(j) * scores(j) / m.variances(j);
    }
    return t2;
}

/// Chi-squared control limit with k degrees of freedom.
inline double hotelling_limit(int k, double confidence) {
    if (k < 1 || !(confidence > 0.0 && confidence < 1.0))
        throw Error(ErrorCode::InvalidBounds, "hotelling_limit needs k >= 1 and confidence in (0,1)");
    return boost::math::quantile(boost::math::chi_squared(static_cast<double>(k)), confidence);
}

struct MonitorResult {
    PcaModel pca;
    std::vector<double> t2;
    double limit = 0.0;
    std::vector<bool> outlier;
};

/// Batch monitoring: preprocess, fit PCA on the batch, flag T^2 > limit.
inline MonitorResult monitor_spectra(const std::vector<Spectrum>& raw, const Preprocessing& prep, int k = 3,
                                     double confidence = 0.99) {
    std::vector<Spectrum> pre;
    pre.reserve(raw.size());
    for (const auto& s : raw) pre.push_back(preprocess(s, prep));
    const MatrixXd X = to_matrix(pre);
    MonitorResult r;
    r.pca = pca_fit(X, k);
    r.limit = hotelling_limit(r.pca.k, confidence);
    const MatrixXd T = pca_project(r.pca, X);
    for (Eigen::Index i = 0; i < T.rows(); ++i) {
        const double t2 = hotelling_t2(r.pca, T.row(i).transpose());
        r.t2.push_back(t2);
        r.outlier.push_back(t2 > r.limit);
    }
    return r;
}

// ---------------------------------------------------------------- PLS

struct PlsModel {
    int lv = 0;                 // latent variables actually extracted
    bool capped = false;
    RowVectorXd x_mean;
    RowVectorXd y_mean;
    MatrixXd weights;           // W, p x lv
    MatrixXd x_loadings;        // P, p x lv
    MatrixXd y_loadings;        // Q, m x lv
    MatrixXd coefficients;      // p x m, applied to centered X
};

/// NIPALS PLS with deflation. Rows are samples; Y may have several columns.
inline PlsModel pls_fit(const MatrixXd& X, const MatrixXd& Y, int lv) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (Y.rows() != n) throw Error(ErrorCode::ShapeMismatch, "X and Y row counts differ");
    if (n < 2) throw Error(ErrorCode::TooFewSamples, "PLS needs >= 2 samples");
    if (lv < 1) throw Error(ErrorCode::InvalidBounds, "lv must be >= 1");
    PlsModel m;
    const int max_lv = static_cast<int>(std::min<Eigen::Index>(n - 1, p));
    if (lv > max_lv) {
        log().warn("PLS: {} latent variables requested, capping at {}", lv, max_lv);
        lv = max_lv;
        m.capped = true;
    }
    m.x_mean = X.colwise().mean();
    m.y_mean = Y.colwise().mean();
    MatrixXd E = X.rowwise() - m.x_mean;
    MatrixXd F = Y.rowwise() - m.y_mean;
    const double x_scale = std::max(E.norm(), 1e-300);

    std::vector<VectorXd> W, P, Q;
    for (int a = 0; a < lv; ++a) {
        Eigen::Index best_col = 0;
        F.colwise().squaredNorm().maxCoeff(&best_col);
        VectorXd u = F.col(best_col);
        VectorXd w, t, q;
        bool ok = false;
        for (int it = 0; it < 500; ++it) {
            w = E.transpose() * u;
            const double wn = w.norm();
            if (!(wn > 1e-12 * x_scale * std::max(u.norm(), 1e-300))) break;
            w /= wn;
            t = E * w;
            const double tt = t.squaredNorm();
            if (!(tt > 0.0)) break;
            q = F.transpose() * t / tt;
            const double qq = q.squaredNorm();
            if (!(qq > 0.0)) break;
            VectorXd u_new = F * q / qq;
            ok = true;
            const double change = (u_new - u).norm() / std::max(u_new.norm(), 1e-300);
            u = std::move(u_new);
            if (change < 1e-10) break;
        }
        if (!ok) {
            // No covariance left between X and Y.
            if (a > 0) log().warn("PLS: stopped after {} of {} latent variables", a, lv);
            break;
        }
        const double tt = t.squaredNorm();
        VectorXd pl = E.transpose() * t / tt;
        E -= t * pl.transpose();
        F -= t * q.transpose();
        W.push_back(w);
        P.push_back(pl);
        Q.push_back(q);
    }
    m.lv = static_cast<int>(W.size());
    m.weights.resize(p, m.lv);
    m.x_loadings.resize(p, m.lv);
    m.y_loadings.resize(Y.cols(), m.lv);
    for (int a = 0; a < m.lv; ++a) {
        m.weights.col(a) = W[a];
        m.x_loadings.col(a) = P[a];
        m.y_loadings.col(a) = Q[a];
    }
    if (m.lv == 0) {
        m.coefficients = MatrixXd::Zero(p, Y.cols());
    } else {
        const MatrixXd PtW = m.x_loadings.transpose() * m.weights;
        m.coefficients = m.weights * PtW.partialPivLu().solve(m.y_loadings.transpose());
    }
    return m;
}

inline PlsModel pls_fit(const MatrixXd& X, const VectorXd& y, int lv) {
    return pls_fit(X, MatrixXd(y), lv);
}

inline MatrixXd pls_predict(const PlsModel& m, const MatrixXd& X) {
    if (X.cols() != m.x_mean.size()) throw Error(ErrorCode::ShapeMismatch, "PLS input width");
    MatrixXd Yp = (X.rowwise() - m.x_mean) * m.coefficients;
    return Yp.rowwise() + m.y_mean;
}

// ---------------------------------------------------------------- cross-validation

struct CvResult {
    VectorXd predictions;       // out-of-fold, in sample order
    std::vector<int> fold_of;   // fold index per sample
    double r2 = 0.0;
    double rmsecv = 0.0;
};

inline double r_squared(const VectorXd& y, const VectorXd& pred) {
    const double mean = y.mean();
    const double ss_tot = (y.array() - mean).square().sum();
    const double ss_res = (y - pred).squaredNorm();
    if (!(ss_tot > 0.0)) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

inline double rmse(const VectorXd& y, const VectorXd& pred) {
    return std::sqrt((y - pred).squaredNorm() / static_cast<double>(y.size()));
}

/// Contiguous block folds over samples in the given (sorted) order; the
/// first n % k folds receive one extra sample.
inline std::vector<int> contiguous_folds(Eigen::Index n, int k_folds) {
    if (k_folds < 2 || k_folds > n)
        throw Error(ErrorCode::TooFewSamples,
                    std::to_string(k_folds) + " folds for " + std::to_string(n) + " samples");
    std::vector<int> fold(static_cast<std::size_t>(n));
    const Eigen::Index base = n / k_folds, extra = n % k_folds;
    Eigen::Index i = 0;
    for (int f = 0; f < k_folds; ++f) {
        const Eigen::Index size = base + (f < extra ? 1 : 0);
        for (Eigen::Index j = 0; j < size; ++j) fold[static_cast<std::size_t>(i++)] = f;
    }
    return fold;
}

/// Generic k-fold CV. `fit_predict(X_train, y_train, X_test) -> VectorXd`.
template <class FitPredict>
    requires std::invocable<FitPredict&, const MatrixXd&, const VectorXd&, const MatrixXd&>
CvResult kfold_cv(const MatrixXd& X, const VectorXd& y, int k_folds, FitPredict&& fit_predict) {
    if (X.rows() != y.size()) throw Error(ErrorCode::ShapeMismatch, "X/y size mismatch");
    CvResult r;
    r.fold_of = contiguous_folds(X.rows(), k_folds);
    r.predictions = VectorXd::Zero(y.size());
    for (int f = 0; f < k_folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            (r.fold_of[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
        const MatrixXd Xtr = X(tr, Eigen::all);
        const VectorXd ytr = y(tr);
        const MatrixXd Xte = X(te, Eigen::all);
        const VectorXd pred = fit_predict(Xtr, ytr, Xte);
        for (std::size_t j = 0; j < te.size(); ++j) r.predictions(te[j]) = pred(static_cast<Eigen::Index>(j));
    }
    r.r2 = r_squared(y, r.predictions);
    r.rmsecv = rmse(y, r.predictions);
    return r;
}

struct PlsSpec {
    int lv = 2;
};

inline CvResult kfold_cv(const MatrixXd& X, const VectorXd& y, int k_folds, const PlsSpec& spec) {
    return kfold_cv(X, y, k_folds, [&](const MatrixXd& Xtr, const VectorXd& ytr, const MatrixXd& Xte) {
        return VectorXd(pls_predict(pls_fit(Xtr, ytr, spec.lv), Xte).col(0));
    });
}

// ---------------------------------------------------------------- direct standardization

struct DsTransform {
    MatrixXd A;  // p x p, tablet ~= blend * A
    double ridge = 0.0;
    int pairs = 0;
};

/// Ridge strength `relative` times the largest eigenvalue of X^T X.
inline double ds_relative_ridge(const MatrixXd& blend, double relative = 1e-6) {
    Eigen::BDCSVD<MatrixXd> svd(blend);
    const auto s = svd.singularValues();
    return s.size() > 0 ? relative * s(0) * s(0) : 0.0;
}

/// A = argmin ||tablet - blend A||^2 + ridge ||A||^2, solved through the thin
/// SVD of the blend matrix (ridge is absolute).
inline DsTransform ds_fit(const MatrixXd& blend, const MatrixXd& tablet, double ridge) {
    if (blend.rows() != tablet.rows() || blend.cols() != tablet.cols() || blend.rows() == 0)
        throw Error(ErrorCode::UnpairedData, "blend and tablet spectra must be paired and equally sized");
    if (ridge < 0.0) throw Error(ErrorCode::InvalidBounds, "ridge must be >= 0");
    Eigen::BDCSVD<MatrixXd> svd(blend, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd s = svd.singularValues();
    VectorXd gain(s.size());
    if (ridge == 0.0) {
        const double tol = (s.size() ? s(0) : 0.0) * 1e-12 * static_cast<double>(std::max(blend.rows(), blend.cols()));
        Eigen::Index rank = 0;
        for (Eigen::Index j = 0; j < s.size(); ++j)
            if (s(j) > tol) ++rank;
        if (rank < blend.cols())
            throw Error(ErrorCode::SingularSystem, "blend spectra have rank " + std::to_string(rank) + " < " +
                                                       std::to_string(blend.cols()) + " wavelengths; use ridge > 0");
        gain = s.cwiseInverse();
    } else {
        gain = s.array() / (s.array().square() + ridge);
    }
    DsTransform t;
    t.A = svd.matrixV() * gain.asDiagonal() * svd.matrixU().transpose() * tablet;
    t.ridge = ridge;
    t.pairs = static_cast<int>(blend.rows());
    return t;
}

inline MatrixXd ds_apply(const DsTransform& t, const MatrixXd& blend) {
    if (blend.cols() != t.A.rows()) throw Error(ErrorCode::ShapeMismatch, "DS input width");
    return blend * t.A;
}

inline VectorXd ds_apply(const DsTransform& t, const VectorXd& blend) {
    return (blend.transpose() * t.A).transpose();
}

// ---------------------------------------------------------------- file formats

/// Single spectrum CSV: header `wavelength,absorbance`.
inline std::string spectrum_to_csv(const Spectrum& s) {
    std::string out = "wavelength,absorbance\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += io::fmt(s.wavelengths[i]) + "," + io::fmt(s.absorbances[i]) + "\n";
    return out;
}

inline Spectrum spectrum_from_csv(const std::filesystem::path& path) {
    const auto lines = io::read_lines(path);
    Spectrum s;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cols = io::split(lines[i]);
        if (cols.size() != 2) throw Error(ErrorCode::ParseError, path.string() + ": expected 2 columns");
        s.wavelengths.push_back(io::parse_double(cols[0]));
        s.absorbances.push_back(io::parse_double(cols[1]));
    }
    return s;
}

inline nlohmann::json to_json(const Spectrum& s) {
    return {{"iteration", s.iteration}, {"kind", to_string(s.kind)},
            {"wavelengths", s.wavelengths}, {"absorbances", s.absorbances}};
}

inline Spectrum spectrum_from_json(const nlohmann::json& j) {
    Spectrum s;
    s.iteration = j.at("iteration").get<int>();
    s.kind = parse_spectrum_kind(j.at("kind").get<std::string>());
    s.wavelengths = j.at("wavelengths").get<std::vector<double>>();
    s.absorbances = j.at("absorbances").get<std::vector<double>>();
    if (s.wavelengths.size() != s.absorbances.size())
        throw Error(ErrorCode::ShapeMismatch, "wavelength/absorbance lengths differ");
    return s;
}

/// JSON-lines batch, one spectrum object per line.
inline std::string spectra_to_jsonl(const std::vector<Spectrum>& spectra) {
    std::string out;
    for (const auto& s : spectra) out += to_json(s).dump() + "\n";
    return out;
}

inline std::vector<Spectrum> spectra_from_jsonl(const std::filesystem::path& path) {
    std::vector<Spectrum> out;
    for (const auto& line : io::read_lines(path)) out.push_back(spectrum_from_json(nlohmann::json::parse(line)));
    return out;
}

/// Per-iteration T^2 chart.
inline std::string t2_chart_csv(const std::vector<Spectrum>& spectra, const MonitorResult& r) {
    std::string out = "iteration,t2,limit,outlier\n";
    for (std::size_t i = 0; i < r.t2.size(); ++i)
        out += std::to_string(spectra[i].iteration) + "," + io::fmt(r.t2[i]) + "," + io::fmt(r.limit) + "," +
               (r.outlier[i] ? "1" : "0") + "\n";
    return out;
}

}  // namespace tabletlab::chemo
