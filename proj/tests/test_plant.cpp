#include <gtest/gtest.h>

#include <cmath>

#include "tabletlab/chemometrics.hpp"
#include "tabletlab/plant.hpp"
#include "test_util.hpp"

using namespace tabletlab;
using namespace tabletlab::plant;

namespace {

PlantConfig quiet() {
    PlantConfig c;
    c.noise = NoiseConfig::off();
    c.truth.elastic = ElasticRecoveryModel::none();
    return c;
}

const Formulation b3{{{"SP", 0.20}, {"CCS", 0.035}, {"LAC1", 0.027}, {"MCC2", 0.728}, {"MgSt", 0.01}}};

}  // namespace

TEST(Dose, ConfigArithmetic) {
    auto c = quiet();
    c.loss = {15.0, 15.0};
    Rng rng(1);
    const auto d = dose_powder(300.0, c, rng);
    EXPECT_EQ(d.measured, 300.0);
    EXPECT_EQ(d.measured - d.loss, 285.0);
    c.loss = {0.0, 0.0};
    EXPECT_EQ(dose_powder(300.0, c, rng).loss, 0.0);
    expect_error(ErrorCode::TargetBelowLoss, [&] { dose_powder(10.0, PlantConfig{}, rng); });
}

TEST(Dose, LossesStayInRange) {
    PlantConfig c;
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const double l = dose_powder(316.0, c, rng).loss;
        ASSERT_GE(l, 10.0);
        ASSERT_LE(l, 22.0);
    }
}

TEST(Gates, D1Band) {
    EXPECT_EQ(gate_d1(310, 300, 0.05), GateVerdict::Accepted);
    EXPECT_EQ(gate_d1(320, 300, 0.05), GateVerdict::Rejected);
    EXPECT_EQ(gate_d1(285, 300, 0.05), GateVerdict::Accepted);
    EXPECT_EQ(gate_d1(315, 300, 0.05), GateVerdict::Accepted);
}

TEST(Gates, D2Bands) {
    TargetProfile tp;
    tp.target_tensile_strength = 2.0;
    TabletRecord t;
    t.weight = 306;
    t.porosity = 0.153;
    t.tensile_strength = 2.04;
    EXPECT_EQ(gate_d2(t, tp, 0.05), GateVerdict::Accepted);
    t.weight = 318;
    EXPECT_EQ(gate_d2(t, tp, 0.05), GateVerdict::Rejected);
    t.weight = 300;
    t.tensile_strength.reset();
    EXPECT_EQ(gate_d2(t, tp, 0.05), GateVerdict::Accepted);
}

TEST(Spectra, LinearMixingAndOutliers) {
    auto c = quiet();
    const Formulation half{{{"MCC2", 0.5}, {"LAC1", 0.5}}};
    c.pure_spectra = pure_spectra_for(half, c.spectral.grid);
    Rng rng(3);
    const auto s = synth_spectrum(half, c, rng, false);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        EXPECT_NEAR(s.absorbances[i], 0.5 * (c.pure_spectra["MCC2"](k) + c.pure_spectra["LAC1"](k)), 1e-15);
    }
    // no API band: the placebo blend is the filler-only mixture
    c.pure_spectra["SP"] = pure_spectrum("SP", c.spectral.grid);
    const auto p = synth_spectrum(Formulation{{{"MCC2", 1.0}}}, c, rng, false);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p.absorbances[i], c.pure_spectra["MCC2"](static_cast<Eigen::Index>(i)));
    expect_error(ErrorCode::MissingPureSpectrum, [&] { synth_spectrum(Formulation{{{"MAN", 1.0}}}, c, rng, false); });
}

TEST(Spectra, OutlierExceedsHotellingLimit) {
    PlantConfig c;
    c.pure_spectra = pure_spectra_for(b3, c.spectral.grid);
    Rng rng(4);
    std::vector<chemo::Spectrum> batch;
    for (int i = 0; i < 200; ++i) batch.push_back(synth_spectrum(b3, c, rng, i == 100));
    const auto r = chemo::monitor_spectra(batch, {});
    EXPECT_GT(r.t2[100], 11.34);
}

TEST(Compress, PhysicsComposition) {
    auto c = quiet();
    c.truth.kawakita = {0.45, 0.02};
    c.truth.rysh_duck = {10.0, 10.0};
    Rng rng(5);
    auto t = compress_tablet(300.0, {20.0, 100.0, 50.0}, c.truth, c, rng);
    EXPECT_NEAR(t.porosity, 0.15, 1e-12);
    EXPECT_EQ(t.diameter, 9.0);
    EXPECT_NEAR(tablet_porosity(t.weight, t.diameter, t.thickness, c.truth.true_density).value, 0.15, 1e-12);
    t = test_tablet(t, true, c.truth, c, rng);
    ASSERT_TRUE(t.tensile_strength.has_value());
    EXPECT_NEAR(*t.tensile_strength, 2.2313, 5e-5);
    EXPECT_NEAR(*t.tensile_strength, 10.0 * std::exp(-1.5), 1e-12);
    EXPECT_TRUE(t.destroyed);

    const auto zero = compress_tablet(300.0, {0.0, 0.0, 50.0}, c.truth, c, rng);
    EXPECT_NEAR(zero.porosity, 0.45, 1e-15);
    EXPECT_TRUE(zero.failed);
    expect_error(ErrorCode::NonPositiveMass, [&] { compress_tablet(0.0, {0, 100, 50}, c.truth, c, rng); });

    const auto nd = test_tablet(compress_tablet(300.0, {20, 100, 50}, c.truth, c, rng), false, c.truth, c, rng);
    EXPECT_FALSE(nd.breaking_force.has_value());
    EXPECT_FALSE(nd.destroyed);
}

TEST(Compress, ElasticRecoverySwellsThickness) {
    auto c = quiet();
    c.truth.elastic = ElasticRecoveryModel{};
    Rng rng(6);
    const ProcessSettings s{20.0, 200.0, 50.0};
    const auto t = compress_tablet(300.0, s, c.truth, c, rng);
    EXPECT_NEAR(elastic_recovery(t.in_die_thickness, t.thickness).value, c.truth.elastic(s), 1e-12);
    const double eps_in = physics::kawakita_porosity(200.0, c.truth.kawakita);
    EXPECT_NEAR(t.porosity, 1.0 - (1.0 - eps_in) / (1.0 + t.elastic_recovery), 1e-12);
}

TEST(ElasticRecoveryModel, MonotoneInPressureAndDwell) {
    const ElasticRecoveryModel er;
    for (double pre : {10.0, 50.0, 100.0})
        for (double dwell : {50.0, 150.0, 300.0}) {
            double prev = -1.0;
            for (double p = 70; p <= 450; p += 10) {
                const double v = er({pre, p, dwell});
                EXPECT_GT(v, prev);
                EXPECT_LE(er({pre, p, dwell + 10.0}), v);
                prev = v;
            }
        }
}

TEST(Plant, ClockAndThroughput) {
    PlantConfig c;
    c.truth.kawakita = {0.6, 0.02};
    const auto r100 = run_manufacture(b3, {20, 200, 50}, 100, c);
    EXPECT_EQ(r100.summary.simulated_seconds, 5000.0);
    EXPECT_NEAR(r100.summary.tablets_per_hour, 72.0, 1e-9);
    const auto r1440 = run_manufacture(b3, {20, 200, 50}, 1440, c);
    // 1,440 tablets at 72 per hour take 20 h, inside the 24 h window
    EXPECT_EQ(r1440.summary.simulated_seconds, 72000.0);
    EXPECT_LE(r1440.summary.simulated_seconds, 86400.0);
    EXPECT_LT(r1440.summary.weight_rsd, 0.03);
    EXPECT_NEAR(r100.summary.powder_consumed_mg / 1000.0, 31.6, 0.5);
}

TEST(Plant, EventOrderAndMassBalance) {
    auto c = quiet();
    c.loss = {10.0, 22.0};
    Plant p(c, b3);
    const auto r = p.run_iteration({20, 200, 50}, true);
    EXPECT_DOUBLE_EQ(r.dose.measured, r.tablet.weight + r.dose.loss);
    std::vector<std::string> kinds;
    for (const auto& e : p.log().events) kinds.push_back(e.kind);
    EXPECT_EQ(kinds, (std::vector<std::string>{"dose", "d1", "spectrum", "compress", "test", "d2", "store", "clean"}));
    double prev = 0.0;
    p.manufacture({20, 200, 50}, 20);
    for (const auto& e : p.log().events) {
        EXPECT_GE(e.time, prev);
        prev = e.time;
    }
}

TEST(Plant, D1AcceptedDosesWithinBand) {
    PlantConfig c;
    c.noise.dose_rel_std = 0.04;  // enough spread to exercise rejections
    Plant p(c, b3);
    int accepted = 0;
    for (int i = 0; i < 500; ++i) {
        const auto r = p.run_iteration({20, 200, 50}, false);
        if (!r.failed) {
            ++accepted;
            EXPECT_LE(std::abs(r.dose.measured - 316.0), 0.05 * 316.0);
        }
    }
    EXPECT_GT(p.d1_rejections(), 0);
    EXPECT_GT(accepted, 450);
}

TEST(Plant, DeterministicBySeed) {
    PlantConfig c;
    c.seed = 42;
    EXPECT_EQ(run_manufacture(b3, {20, 200, 50}, 30, c).log.to_jsonl(),
              run_manufacture(b3, {20, 200, 50}, 30, c).log.to_jsonl());
}

TEST(TrainingSet, EnvelopesAndDeterminism) {
    const auto model = mixture::MixtureModel::fit(fixture_library());
    EXPECT_EQ(generate_training_set(model, {}, 0, 1).rows(), 0);
    const auto d = generate_training_set(model, {}, 500, 1);
    ASSERT_EQ(d.rows(), 500);
    EXPECT_GE(d.porosity.minCoeff(), 0.028);
    EXPECT_LE(d.porosity.maxCoeff(), 0.811);
    EXPECT_GE(d.tensile_strength.minCoeff(), 0.029);
    EXPECT_LE(d.tensile_strength.maxCoeff(), 13.916);
    EXPECT_EQ(generate_training_set(model, {}, 50, 7).features, generate_training_set(model, {}, 50, 7).features);
}

TEST(TrainingSet, NoiselessRowsFollowPhysics) {
    const auto model = mixture::MixtureModel::fit(fixture_library());
    SamplerConfig sc;
    sc.porosity_noise = 0.0;
    sc.ts_log_noise = 0.0;
    const auto d = generate_training_set(model, sc, 50, 3);
    // Rebuild each row's formulation from the same random stream.
    Rng rng(3);
    std::uniform_real_distribution<double> up(sc.min_pressure, sc.max_pressure);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        std::string api;
        const auto f = sample_formulation(sc, rng, api);
        const double p = up(rng);
        const auto truth = ground_truth(f, model);
        const double eps = physics::kawakita_porosity(p, truth.kawakita);
        EXPECT_EQ(d.porosity(i), eps);
        EXPECT_EQ(d.tensile_strength(i), physics::rd_tensile_strength(eps, truth.rysh_duck));
        EXPECT_EQ(d.api[static_cast<std::size_t>(i)], api);
    }
}

TEST(GroundTruth, PlausibleRanges) {
    const auto model = mixture::MixtureModel::fit(fixture_library());
    const auto g = ground_truth(b3, model);
    EXPECT_GT(g.kawakita.eps0, 0.5);
    EXPECT_LT(g.kawakita.eps0, 0.8);
    EXPECT_GT(g.kawakita.B, 0.01);
    EXPECT_LT(g.kawakita.B, 0.03);
    EXPECT_GT(g.rysh_duck.T_hat, 5.0);
    EXPECT_LT(g.rysh_duck.T_hat, 14.0);
    EXPECT_GT(g.rysh_duck.k_b, 5.0);
    EXPECT_LT(g.rysh_duck.k_b, 10.0);
}
