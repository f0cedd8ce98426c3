#include <gtest/gtest.h>

#include <set>

#include "tabletlab/mobo.hpp"
#include "test_util.hpp"

using namespace tabletlab;
using namespace tabletlab::mobo;

namespace {

const Formulation b3{{{"SP", 0.20}, {"CCS", 0.035}, {"LAC1", 0.027}, {"MCC2", 0.728}, {"MgSt", 0.01}}};

plant::PlantConfig synthetic(bool noisy) {
    plant::PlantConfig c;
    if (!noisy) c.noise = plant::NoiseConfig::off();
    c.truth.kawakita = {0.5, 0.01};
    c.truth.rysh_duck = {12.0, 8.0};
    c.seed = 3;
    return c;
}

MoboConfig small_config() {
    MoboConfig c;
    c.lhs_points = 8;
    c.iterations = 6;
    c.acquisition_resolution = 8;
    c.seed = 2;
    return c;
}

Slice slice(MatrixXd er, MatrixXd eps, MatrixXd ts, double dwell = 50.0) {
    Slice s;
    s.dwell = dwell;
    for (Eigen::Index i = 0; i < er.rows(); ++i) s.precompression.push_back(10.0 + 10.0 * static_cast<double>(i));
    for (Eigen::Index j = 0; j < er.cols(); ++j) s.main_compression.push_back(100.0 + 50.0 * static_cast<double>(j));
    s.elastic_recovery = std::move(er);
    s.porosity = std::move(eps);
    s.tensile_strength = std::move(ts);
    return s;
}

}  // namespace

TEST(RunMobo, BudgetAndBounds) {
    plant::Plant plant(synthetic(true), b3);
    const auto cfg = small_config();
    const auto r = run_mobo(plant, cfg);
    EXPECT_EQ(r.lhs_experiments, 8);
    EXPECT_EQ(r.explore_experiments, 6);
    ASSERT_EQ(r.state.observations.size(), 14u);
    EXPECT_EQ(plant.iterations(), 14 * 3);
    for (const auto& o : r.state.observations) {
        EXPECT_GE(o.settings.precompression_pressure, 10.0);
        EXPECT_LE(o.settings.precompression_pressure, 100.0);
        EXPECT_GE(o.settings.main_compression_pressure, 70.0);
        EXPECT_LE(o.settings.main_compression_pressure, 450.0);
        EXPECT_GE(o.settings.dwell_time, 50.0);
        EXPECT_LE(o.settings.dwell_time, 300.0);
    }
}

TEST(RunMobo, LhsOnly) {
    plant::Plant plant(synthetic(true), b3);
    auto cfg = small_config();
    cfg.iterations = 0;
    const auto r = run_mobo(plant, cfg);
    EXPECT_EQ(r.state.observations.size(), 8u);
    EXPECT_EQ(r.explore_experiments, 0);
    for (const auto& o : r.state.observations) EXPECT_EQ(o.origin, "lhs");
}

TEST(RunMobo, Deterministic) {
    auto run = [] {
        plant::Plant plant(synthetic(true), b3);
        return observations_csv(run_mobo(plant, small_config()).state);
    };
    EXPECT_EQ(run(), run());
}

TEST(RunMobo, ExplorationMovesAwayFromData) {
    plant::Plant plant(synthetic(false), b3);
    const auto r = run_mobo(plant, small_config());
    std::set<std::tuple<double, double, double>> seen;
    for (const auto& o : r.state.observations) {
        const auto key = std::tuple{o.settings.precompression_pressure, o.settings.main_compression_pressure, o.settings.dwell_time};
        EXPECT_TRUE(seen.insert(key).second) << "repeated point";
    }
}

TEST(PredictGrid, InterpolatesAndShapes) {
    plant::Plant plant(synthetic(false), b3);
    auto cfg = small_config();
    cfg.iterations = 0;
    auto r = run_mobo(plant, cfg);
    const auto& o = r.state.observations.front();
    const auto g = predict_grid(r.state, {o.settings.dwell_time}, 1);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0].porosity.rows(), 1);
    EXPECT_EQ(g[0].porosity.cols(), 1);

    const auto at = gp::gp_posterior(*r.state.gp_porosity, as_point(o.settings));
    EXPECT_NEAR(at.mean, o.porosity, 1e-3);
    const auto slices = predict_grid(r.state, {50, 150, 300}, 20);
    ASSERT_EQ(slices.size(), 3u);
    EXPECT_EQ(slices[1].tensile_strength.rows(), 20);
    EXPECT_EQ(slices[1].tensile_strength.cols(), 20);
    expect_error(ErrorCode::NotFitted, [] { predict_grid(MoboState{}, {50}, 5); });
}

TEST(PredictGrid, PorosityFallsWithMainPressure) {
    plant::Plant plant(synthetic(false), b3);
    const auto r = run_mobo(plant, small_config());
    const auto g = predict_grid(r.state, {150}, 10);
    for (Eigen::Index i = 0; i < 10; ++i) EXPECT_GT(g[0].porosity(i, 0), g[0].porosity(i, 9));
}

TEST(FeasibleRegion, Thresholds) {
    MatrixXd er(2, 2), eps(2, 2), ts(2, 2);
    er << 0.05, 0.06, 0.04, 0.05;
    eps << 0.30, 0.20, 0.16, 0.10;
    ts << 1.0, 2.5, 3.0, 4.0;
    const std::vector<Slice> g{slice(er, eps, ts)};
    const auto m = feasible_region(g, {});
    EXPECT_FALSE(m[0](0, 0));
    EXPECT_TRUE(m[0](0, 1));
    EXPECT_TRUE(m[0](1, 0));
    EXPECT_FALSE(m[0](1, 1));
    EXPECT_EQ(feasible_region(g, {100.0, 0.15})[0].count(), 0);
    EXPECT_EQ(feasible_region(g, {0.0, 0.0})[0].count(), 4);
    for (double t = 0.0; t < 5.0; t += 0.5)
        EXPECT_TRUE(((feasible_region(g, {t + 0.5, 0.15})[0] && !feasible_region(g, {t, 0.15})[0])).count() == 0);
    auto bad = g;
    bad[0].porosity.resize(3, 2);
    expect_error(ErrorCode::ShapeMismatch, [&] { feasible_region(bad, {}); });
}

TEST(SelectOperatingPoint, ArgminWithTieBreaks) {
    MatrixXd er(2, 2), eps(2, 2), ts(2, 2);
    er << 0.05, 0.04, 0.04, 0.06;
    eps.setConstant(0.2);
    ts.setConstant(3.0);
    const std::vector<Slice> g{slice(er, eps, ts)};
    const auto p = select_operating_point(g, feasible_region(g, {}));
    // (0,1): pre 10, main 150 and (1,0): pre 20, main 100 tie on ER; lower main wins
    EXPECT_EQ(p.settings.main_compression_pressure, 100.0);
    EXPECT_EQ(p.settings.precompression_pressure, 20.0);

    Mask single = Mask::Constant(2, 2, false);
    single(1, 1) = true;
    EXPECT_EQ(select_operating_point(g, {single}).elastic_recovery, 0.06);
    expect_error(ErrorCode::EmptyFeasibleRegion, [&] { select_operating_point(g, {Mask::Constant(2, 2, false)}); });
}

TEST(SelectOperatingPoint, GroundTruthPicksLowPressureBoundary) {
    MoboConfig cfg;
    const auto truth = synthetic(false).truth;
    const auto g = ground_truth_grid(truth, cfg);
    const auto m = feasible_region(g, {});
    const auto p = select_operating_point(g, m);
    const auto& s = g.front();
    const auto j = std::find(s.main_compression.begin(), s.main_compression.end(), p.settings.main_compression_pressure) -
                   s.main_compression.begin();
    ASSERT_GT(j, 0);
    const auto below = plant::noiseless_response({p.settings.precompression_pressure, s.main_compression[static_cast<std::size_t>(j - 1)],
                                                  p.settings.dwell_time}, truth);
    EXPECT_LT(below.tensile_strength, 2.0);
    EXPECT_EQ(p.settings.dwell_time, 300.0);
    EXPECT_EQ(p.settings.precompression_pressure, 100.0);
}

TEST(MaskAgreement, Counts) {
    Mask a = Mask::Constant(2, 2, true), b = a;
    b(0, 0) = false;
    EXPECT_DOUBLE_EQ(mask_agreement({a}, {b}), 0.75);
    expect_error(ErrorCode::ShapeMismatch, [&] { mask_agreement({a}, {a, b}); });
}

TEST(GridCsv, Layout) {
    MatrixXd v(2, 2);
    v << 1, 2, 3, 4;
    const auto s = slice(v, v, v);
    EXPECT_EQ(grid_csv(s, v), "precompression,100,150\n10,1,2\n20,3,4\n");
}
