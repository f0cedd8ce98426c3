#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tabletlab/chemometrics.hpp"
#include "test_util.hpp"

using namespace tabletlab;
using namespace tabletlab::chemo;

namespace {

Spectrum make_spectrum(std::vector<double> a) {
    Spectrum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.wavelengths.push_back(1000.0 + 2.0 * static_cast<double>(i));
    s.absorbances = std::move(a);
    return s;
}

Spectrum random_spectrum(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> a(n);
    for (auto& v : a) v = 2.0 + g(rng);
    return make_spectrum(a);
}

}  // namespace

TEST(Trim, InclusiveSubrange) {
    Spectrum s;
    s.wavelengths = default_nir_grid();
    s.absorbances.assign(s.wavelengths.size(), 1.0);
    const auto full = trim(s, 908, 1676);
    EXPECT_EQ(full.wavelengths, s.wavelengths);
    const auto t = trim(s, 1050, 1450);
    EXPECT_GE(t.wavelengths.front(), 1050.0);
    EXPECT_LE(t.wavelengths.back(), 1450.0);
    EXPECT_EQ(t.wavelengths.front(), 1052.0);  // first 4-nm grid point >= 1050
    EXPECT_EQ(t.wavelengths.back(), 1448.0);
    expect_error(ErrorCode::EmptyRange, [&] { trim(s, 2000, 2100); });
}

TEST(Snv, Examples) {
    const auto out = snv(make_spectrum({1, 2, 3}));
    EXPECT_NEAR(out.absorbances[0], -1.0, 1e-15);
    EXPECT_NEAR(out.absorbances[1], 0.0, 1e-15);
    EXPECT_NEAR(out.absorbances[2], 1.0, 1e-15);
    expect_error(ErrorCode::ZeroVariance, [] { snv(make_spectrum({4, 4, 4, 4})); });
    const auto twice = snv(out);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(twice.absorbances[i], out.absorbances[i], 1e-15);
}

TEST(Snv, MomentsExactOnRandomSpectra) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        const auto s = snv(random_spectrum(rng, 101));
        double mean = 0.0;
        for (double a : s.absorbances) mean += a;
        mean /= 101.0;
        double ss = 0.0;
        for (double a : s.absorbances) ss += (a - mean) * (a - mean);
        EXPECT_LT(std::abs(mean), 1e-12);
        EXPECT_NEAR(std::sqrt(ss / 100.0), 1.0, 1e-12);
    }
}

TEST(Savgol, ReproducesQuadratic) {
    std::vector<double> y;
    for (int i = 0; i < 30; ++i) y.push_back(0.3 * i * i - 2.0 * i + 5.0);
    const auto out = savgol(make_spectrum(y), 5, 2, 0);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(out.absorbances[i], y[i], 1e-9);
}

TEST(Savgol, LinearRampDerivative) {
    const double m = 0.7;
    VectorXd y(40);
    for (int i = 0; i < 40; ++i) y(i) = m * i + 3.0;
    const auto d = savgol_filter(y, 9, 2, 1, 1.0);
    for (int i = 0; i < 40; ++i) EXPECT_NEAR(d(i), m, 1e-10);
}

TEST(Savgol, DerivativeScalesWithSpacing) {
    // y = x^2 sampled at 2-nm spacing, derivative 2x
    std::vector<double> y;
    auto s = make_spectrum(std::vector<double>(25, 0.0));
    for (std::size_t i = 0; i < s.size(); ++i) s.absorbances[i] = s.wavelengths[i] * s.wavelengths[i];
    const auto d = savgol(s, 7, 2, 1);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(d.absorbances[i], 2 * s.wavelengths[i], 1e-6);
}

TEST(Savgol, EvenWindowRoundsUp) {
    VectorXd y(30);
    for (int i = 0; i < 30; ++i) y(i) = std::sin(0.2 * i);
    const VectorXd a = savgol_filter(y, 8, 2, 1);
    const VectorXd b = savgol_filter(y, 9, 2, 1);
    EXPECT_EQ((a - b).norm(), 0.0);
}

TEST(Savgol, PreservesPolynomialsUpToOrder) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int order = 0; order <= 4; ++order) {
        VectorXd c(order + 1);
        for (int k = 0; k <= order; ++k) c(k) = u(rng);
        VectorXd y(50);
        for (int i = 0; i < 50; ++i) {
            double v = 0, x = (i - 25) / 10.0;
            for (int k = 0; k <= order; ++k) v += c(k) * std::pow(x, k);
            y(i) = v;
        }
        const VectorXd f = savgol_filter(y, 11, std::max(order, 1), 0);
        for (int i = 5; i < 45; ++i) EXPECT_NEAR(f(i), y(i), 1e-9);
    }
}

TEST(Savgol, WindowTooSmall) {
    VectorXd y = VectorXd::LinSpaced(20, 0, 1);
    expect_error(ErrorCode::WindowTooSmall, [&] { savgol_filter(y, 2, 2, 0); });
    expect_error(ErrorCode::WindowTooSmall, [&] { savgol_filter(y, 3, 3, 0); });
    expect_error(ErrorCode::WindowTooSmall, [&] { savgol_filter(VectorXd::Zero(4), 5, 2, 0); });
}

TEST(Pca, LineYEqualsX) {
    MatrixXd X(5, 2);
    for (int i = 0; i < 5; ++i) X.row(i) << i * 1.5, i * 1.5;
    const auto m = pca_fit(X, 1);
    EXPECT_NEAR(m.explained_ratio(0), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(m.loadings(0, 0)), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(std::abs(m.loadings(1, 0)), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(pca_project(m, VectorXd(m.mean.transpose())).norm(), 0.0, 1e-15);
}

TEST(Pca, TruncatesBeyondRank) {
    MatrixXd X(5, 2);
    for (int i = 0; i < 5; ++i) X.row(i) << i, 2.0 * i;
    const auto m = pca_fit(X, 2);
    EXPECT_TRUE(m.truncated);
    EXPECT_EQ(m.k, 1);
}

TEST(Pca, OrthonormalAndReconstruction) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0, 1);
    MatrixXd X(40, 12);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 12; ++j) X(i, j) = g(rng) * (12 - j);
    const auto m = pca_fit(X, 4);
    EXPECT_LT((m.loadings.transpose() * m.loadings - MatrixXd::Identity(4, 4)).norm(), 1e-10);
    EXPECT_LE(m.explained_ratio.sum(), 1.0 + 1e-12);
    for (int j = 1; j < 4; ++j) EXPECT_GE(m.variances(j - 1), m.variances(j));
    const MatrixXd Xc = X.rowwise() - m.mean;
    const MatrixXd recon = pca_project(m, X) * m.loadings.transpose();
    const double lost = (Xc - recon).squaredNorm() / Xc.squaredNorm();
    EXPECT_LE(lost, 1.0 - m.explained_ratio.sum() + 1e-10);
}

TEST(Hotelling, DirectSubstitution) {
    PcaModel m;
    m.k = 3;
    m.variances = Eigen::Vector3d(4.0, 2.0, 0.5);
    EXPECT_NEAR(hotelling_t2(m, Eigen::Vector3d(2.0, std::sqrt(2.0), std::sqrt(0.5))), 3.0, 1e-12);
    EXPECT_EQ(hotelling_t2(m, Eigen::Vector3d::Zero()), 0.0);
    m.variances(2) = 0.0;
    expect_error(ErrorCode::ZeroVarianceComponent, [&] { hotelling_t2(m, Eigen::Vector3d(1, 1, 1)); });
}

TEST(Hotelling, ControlLimit) {
    EXPECT_NEAR(hotelling_limit(3, 0.99), 11.34, 0.01);
    EXPECT_NEAR(hotelling_limit(1, 0.95), 3.841458820694124, 1e-9);
}

TEST(Hotelling, InvariantUnderLoadingSignFlip) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    MatrixXd X(30, 6);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 6; ++j) X(i, j) = g(rng) * (j + 1);
    auto m = pca_fit(X, 3);
    auto flipped = m;
    flipped.loadings.col(1) *= -1.0;
    for (int i = 0; i < 30; ++i) {
        const VectorXd x = X.row(i).transpose();
        EXPECT_NEAR(hotelling_t2(m, pca_project(m, x)), hotelling_t2(flipped, pca_project(flipped, x)), 1e-10);
    }
}

TEST(Pls, RecoversNoiselessLinear) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0, 1);
    MatrixXd X(25, 4);
    for (int i = 0; i < 25; ++i)
        for (int j = 0; j < 4; ++j) X(i, j) = g(rng);
    const Eigen::Vector4d w(1.5, -2.0, 0.3, 0.8);
    const VectorXd y = X * w;
    const auto m = pls_fit(X, y, 4);
    const VectorXd pred = pls_predict(m, X).col(0);
    EXPECT_GE(r_squared(y, pred), 0.999);
    EXPECT_LT((m.coefficients.col(0) - w).norm(), 1e-8);
}

TEST(Pls, ConstantResponse) {
    MatrixXd X = MatrixXd::Random(10, 3);
    const VectorXd y = VectorXd::Constant(10, 4.2);
    const auto m = pls_fit(X, y, 2);
    EXPECT_EQ(m.coefficients.norm(), 0.0);
    const VectorXd pred = pls_predict(m, MatrixXd::Random(5, 3)).col(0);
    for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(pred(i), 4.2);
}

TEST(Pls, CapsLatentVariables) {
    MatrixXd X(3, 50);
    X.setRandom();
    const VectorXd y = Eigen::Vector3d(1, 2, 3);
    const auto m = pls_fit(X, y, 10);
    EXPECT_TRUE(m.capped);
    EXPECT_LE(m.lv, 2);
}

TEST(KfoldCv, PerfectLinearAndLoo) {
    MatrixXd X(20, 2);
    for (int i = 0; i < 20; ++i) X.row(i) << i, std::sin(i);
    const VectorXd y = 3.0 * X.col(0) - X.col(1);
    const auto r = kfold_cv(X, y, 5, PlsSpec{2});
    EXPECT_NEAR(r.r2, 1.0, 1e-9);
    EXPECT_NEAR(r.rmsecv, 0.0, 1e-7);
    const auto loo = kfold_cv(X, y, 20, PlsSpec{2});
    std::vector<int> expected(20);
    for (int i = 0; i < 20; ++i) expected[i] = i;
    EXPECT_EQ(loo.fold_of, expected);
    expect_error(ErrorCode::TooFewSamples, [&] { kfold_cv(X, y, 21, PlsSpec{2}); });
}

TEST(DirectStandardization, IdentityOnTrainingSpan) {
    std::mt19937_64 rng(2);
    MatrixXd B(8, 60);
    for (int i = 0; i < 8; ++i) B.row(i) = Eigen::Map<const RowVectorXd>(random_spectrum(rng, 60).absorbances.data(), 60);
    const auto t = ds_fit(B, B, 1e-10);
    EXPECT_LT((ds_apply(t, B) - B).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DirectStandardization, ScalingOracle) {
    std::mt19937_64 rng(12);
    MatrixXd B(8, 60);
    for (int i = 0; i < 8; ++i) B.row(i) = Eigen::Map<const RowVectorXd>(random_spectrum(rng, 60).absorbances.data(), 60);
    const auto t = ds_fit(B, 2.0 * B, 1e-10);
    // any spectrum in the row span of B
    const VectorXd x = (0.3 * B.row(1) - 1.2 * B.row(4) + 0.5 * B.row(7)).transpose();
    EXPECT_LT((ds_apply(t, x) - 2.0 * x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DirectStandardization, Errors) {
    MatrixXd B = MatrixXd::Random(5, 200);
    expect_error(ErrorCode::SingularSystem, [&] { ds_fit(B, B, 0.0); });
    expect_error(ErrorCode::UnpairedData, [&] { ds_fit(B, MatrixXd::Random(4, 200), 1e-6); });
    // full column rank without ridge is fine
    MatrixXd tall = MatrixXd::Random(30, 5);
    const auto t = ds_fit(tall, 3.0 * tall, 0.0);
    EXPECT_LT((t.A - 3.0 * MatrixXd::Identity(5, 5)).norm(), 1e-9);
}

TEST(SpectrumIo, JsonLinesRoundTrip) {
    std::mt19937_64 rng(1);
    std::vector<Spectrum> batch{random_spectrum(rng, 10), random_spectrum(rng, 10)};
    batch[1].iteration = 7;
    batch[1].kind = SpectrumKind::Tablet;
    const auto path = std::filesystem::temp_directory_path() / "tabletlab_spectra.jsonl";
    io::write_file(path, spectra_to_jsonl(batch));
    const auto back = spectra_from_jsonl(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].iteration, 7);
    EXPECT_EQ(back[1].kind, SpectrumKind::Tablet);
    EXPECT_EQ(back[0].absorbances, batch[0].absorbances);
}
