#include <gtest/gtest.h>

#include <cmath>

#include "tabletlab/pibo.hpp"
#include "test_util.hpp"

using namespace tabletlab;
using namespace tabletlab::pibo;

namespace {

const Formulation b3{{{"SP", 0.20}, {"CCS", 0.035}, {"LAC1", 0.027}, {"MCC2", 0.728}, {"MgSt", 0.01}}};

plant::PlantConfig synthetic(physics::KawakitaParams k, physics::RyshDuckParams rd, bool noisy, std::uint64_t seed = 1) {
    plant::PlantConfig c;
    if (!noisy) c.noise = plant::NoiseConfig::off();
    else c.noise.porosity_std = 0.003;
    c.truth.elastic = plant::ElasticRecoveryModel::none();
    c.truth.kawakita = k;
    c.truth.rysh_duck = rd;
    c.seed = seed;
    return c;
}

Measurement exact(double p, physics::KawakitaParams k, physics::RyshDuckParams rd) {
    const double eps = physics::kawakita_porosity(p, k);
    return {p, eps, physics::rd_tensile_strength(eps, rd), 3};
}

// Trapezoid quadrature of E[max(0, best - |X - target|)].
double ei_quadrature(double mean, double std, double target, double best) {
    const int n = 200000;
    const double a = target - best, b = target + best, h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = a + i * h;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        const double z = (x - mean) / std;
        acc += w * (best - std::abs(x - target)) * std::exp(-0.5 * z * z) / (std * std::sqrt(2.0 * M_PI));
    }
    return acc * h;
}

}  // namespace

TEST(RefitPhysics, RecoversGeneratingParameters) {
    PiboConfig cfg;
    auto s = make_state(cfg);
    const physics::KawakitaParams k{0.5, 0.015};
    const physics::RyshDuckParams rd{12.0, 8.0};
    for (double p : {70.0, 200.0, 450.0}) s.observations.push_back(exact(p, k, rd));
    refit_physics(s);
    EXPECT_NEAR(s.kawakita->eps0, 0.5, 1e-9);
    EXPECT_NEAR(s.kawakita->B, 0.015, 1e-9);
    EXPECT_NEAR(s.rysh_duck->T_hat, 12.0, 1e-9);
    EXPECT_NEAR(s.rysh_duck->k_b, 8.0, 1e-9);
    ASSERT_EQ(s.history.size(), 1u);
    EXPECT_LT(s.rmse_kawakita.back(), 1e-10);
}

TEST(RefitPhysics, ConsistentPointDoesNotRaiseRmse) {
    auto s = make_state({});
    s.observations = {{70, 0.30, 3.0, 3}, {200, 0.20, 5.5, 3}, {450, 0.12, 7.0, 3}};
    refit_physics(s);
    s.observations.push_back({300, physics::kawakita_porosity(300, *s.kawakita),
                              physics::rd_tensile_strength(physics::kawakita_porosity(300, *s.kawakita), *s.rysh_duck), 3});
    refit_physics(s);
    EXPECT_LE(s.rmse_kawakita[1], s.rmse_kawakita[0] + 1e-12);
    EXPECT_LE(s.rmse_rysh_duck[1], s.rmse_rysh_duck[0] + 1e-12);
}

TEST(RefitPhysics, NeedsTwoObservations) {
    auto s = make_state({});
    s.observations.push_back({100, 0.2, 3.0, 3});
    expect_error(ErrorCode::InsufficientData, [&] { refit_physics(s); });
}

TEST(ExpectedImprovementAbs, MatchesQuadrature) {
    for (auto [m, sd, b] : {std::tuple{0.15, 0.02, 0.03}, {0.2, 0.05, 0.04}, {0.1, 0.01, 0.06}, {0.3, 0.02, 0.01}})
        EXPECT_NEAR(expected_improvement_abs(m, sd, 0.15, b), ei_quadrature(m, sd, 0.15, b), 1e-9) << m << ' ' << sd;
}

TEST(ExpectedImprovementAbs, DegenerateAndLimits) {
    EXPECT_NEAR(expected_improvement_abs(0.17, 0.0, 0.15, 0.05), 0.03, 1e-15);
    EXPECT_EQ(expected_improvement_abs(0.25, 0.0, 0.15, 0.05), 0.0);
    EXPECT_EQ(expected_improvement_abs(0.15, 0.1, 0.15, 0.0), 0.0);
    EXPECT_NEAR(expected_improvement_abs(0.16, 1e-9, 0.15, 0.05), 0.04, 1e-8);
}

TEST(SelectNextPressure, SymmetricStateLandsBetween) {
    PiboConfig cfg;
    auto s = make_state(cfg);
    s.target_porosity = 0.2;
    s.observations = {{100, 0.3, 3.0, 3}, {300, 0.1, 6.0, 3}};
    refit_physics(s);
    refit_gps(s, cfg.gp);
    const auto sel = select_next_pressure(s, cfg);
    EXPECT_GT(sel.chosen.pressure, 100.0);
    EXPECT_LT(sel.chosen.pressure, 300.0);
}

TEST(SelectNextPressure, DegenerateGpPicksAnalyticInverse) {
    PiboConfig cfg;
    auto s = make_state(cfg);
    const physics::KawakitaParams k{0.45, 0.02};
    const physics::RyshDuckParams rd{10.0, 10.0};
    for (double p = 70.0; p <= 450.0; p += 20.0) s.observations.push_back(exact(p, k, rd));
    refit_physics(s);
    refit_gps(s, cfg.gp);
    const auto sel = select_next_pressure(s, cfg);
    EXPECT_NEAR(sel.chosen.pressure, physics::kawakita_pressure_for_porosity(0.15, k), 1.0);
}

TEST(SelectNextPressure, NotFitted) {
    auto s = make_state({});
    expect_error(ErrorCode::NotFitted, [&] { select_next_pressure(s, {}); });
}

TEST(Termination, Rules) {
    const TuningParameters a{0.45, 0.02, 10, 10};
    const TuningParameters b{0.495, 0.022, 11, 11};
    const TuningParameters c{0.5445, 0.0242, 12.1, 12.1};
    EXPECT_TRUE(check_termination({a, b, c}));
    EXPECT_FALSE(check_termination({a, b}));
    auto d = c;
    d.B = 0.022 * 1.25;
    EXPECT_FALSE(check_termination({a, b, d}));
    EXPECT_FALSE(check_termination({a, TuningParameters{0.495, 0.03, 11, 11}, b, c}));
    EXPECT_TRUE(check_termination({TuningParameters{0.1, 0.1, 1, 1}, a, b, c}));
    const TuningParameters zero{0.45, 0.0, 10, 10};
    EXPECT_TRUE(check_termination({zero, zero, zero}));
}

TEST(ValidationPressure, AnalyticInverseAndClamp) {
    auto s = make_state({});
    s.kawakita = physics::KawakitaParams{0.45, 0.02};
    EXPECT_NEAR(validation_pressure(s).pressure, 100.0, 1e-9);
    EXPECT_FALSE(validation_pressure(s).clamped);
    s.target_porosity = 0.45;
    const auto v = validation_pressure(s);
    EXPECT_EQ(v.pressure, 70.0);
    EXPECT_TRUE(v.clamped);
    s.kawakita.reset();
    expect_error(ErrorCode::NotFitted, [&] { validation_pressure(s); });
}

TEST(RunPibo, NoiselessClosedLoop) {
    plant::Plant plant(synthetic({0.45, 0.02}, {10.0, 10.0}, false), b3);
    const auto r = run_pibo(plant, {});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.experiments, 6);
    ASSERT_TRUE(r.validation);
    EXPECT_LE(std::abs(r.validation->measured_porosity - 0.15), 0.001);
    EXPECT_NEAR(r.validation->measured_porosity, physics::kawakita_porosity(r.validation->pressure, {0.45, 0.02}), 1e-12);
    const auto& t = *r.final_parameters;
    EXPECT_NEAR(t.eps0, 0.45, 0.045);
    EXPECT_NEAR(t.B, 0.02, 0.002);
    EXPECT_NEAR(t.T_hat, 10.0, 1.0);
    EXPECT_NEAR(t.k_b, 10.0, 1.0);
    for (const auto& it : r.iterations) {
        EXPECT_GE(it.measurement.pressure, 70.0);
        EXPECT_LE(it.measurement.pressure, 450.0);
    }
}

TEST(RunPibo, NoisyClosedLoopHitsTarget) {
    plant::Plant plant(synthetic({0.5, 0.012}, {14.0, 9.0}, true, 4), b3);
    const auto r = run_pibo(plant, {});
    EXPECT_LE(r.experiments, 10);
    ASSERT_TRUE(r.validation);
    EXPECT_LE(std::abs(r.validation->measured_porosity - 0.15), 0.01);
}

TEST(RunPibo, ZeroBudget) {
    plant::Plant plant(synthetic({0.45, 0.02}, {10.0, 10.0}, false), b3);
    PiboConfig cfg;
    cfg.max_iterations = 0;
    const auto r = run_pibo(plant, cfg);
    EXPECT_EQ(r.experiments, 0);
    EXPECT_FALSE(r.converged);
    EXPECT_FALSE(r.validation);
    EXPECT_EQ(plant.iterations(), 0);
}

TEST(RunPibo, ScreenLogIsConsistent) {
    plant::Plant plant(synthetic({0.55, 0.03}, {8.0, 12.0}, true, 7), b3);
    const auto r = run_pibo(plant, {});
    for (std::size_t i = 1; i < r.iterations.size(); ++i) {
        const auto& it = r.iterations[i];
        if (it.origin != "ei") continue;
        EXPECT_TRUE(it.relaxed || it.screened_out < 512);
    }
    const auto j = to_json(r);
    EXPECT_EQ(j["experiments"], r.experiments);
    EXPECT_EQ(j["iterations"].size(), r.iterations.size());
}

TEST(RunPibo, Deterministic) {
    auto run = [] {
        plant::Plant plant(synthetic({0.4, 0.01}, {9.0, 7.0}, true, 3), b3);
        return to_json(run_pibo(plant, {})).dump();
    };
    EXPECT_EQ(run(), run());
}

TEST(CurvesCsv, Shape) {
    const auto csv = curves_csv({0.45, 0.02, 10, 10}, 70, 450, 5);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
    EXPECT_NE(csv.find("\n70,0.18749999999999997,"), std::string::npos) << csv;
}
