#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "tabletlab/campaign.hpp"
#include "test_util.hpp"

using namespace tabletlab;
using namespace tabletlab::campaign;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tabletlab_campaign_" + name);
    fs::remove_all(p);
    return p;
}

json blend() {
    return json::array({{{"material", "SP"}, {"fraction", 0.2}},
                        {{"material", "MCC2"}, {"fraction", 0.755}},
                        {{"material", "CCS"}, {"fraction", 0.035}},
                        {{"material", "MgSt"}, {"fraction", 0.01}}});
}

json base(const std::string& mode) {
    return {{"mode", mode}, {"seed", 7}, {"library", {{"data_dir", TABLETLAB_DATA_DIR}}}};
}

json small_formulate() {
    auto j = base("formulate");
    j["gen_data"] = {{"rows", 200}};
    j["surrogate"] = {{"ensemble_size", 2}, {"hidden", {16}}, {"epochs", 3}};
    j["formulator"] = {{"population", 8}, {"generations", 2}};
    return j;
}

std::string read(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST(Config, UnknownKeyIsNamed) {
    auto j = base("pibo");
    j["plant"] = {{"noize", {{"enabled", false}}}};
    try {
        parse_config(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParseError);
        EXPECT_NE(std::string(e.what()).find("plant.noize"), std::string::npos) << e.what();
        EXPECT_EQ(exit_code(e), 2);
    }
}

TEST(Config, WrongTypeIsNamed) {
    auto j = base("pibo");
    j["pibo"] = {{"max_iterations", "ten"}};
    try {
        parse_config(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigParseError);
        EXPECT_NE(std::string(e.what()).find("pibo.max_iterations"), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownModeAndMissingSeed) {
    expect_error(ErrorCode::UnknownMode, [] { parse_config(base("bake")); });
    auto j = base("pibo");
    j.erase("seed");
    expect_error(ErrorCode::ConfigParseError, [&] { parse_config(j); });
    EXPECT_EQ(parse_config(j, 3).seed, 3u);
    EXPECT_EQ(exit_code(Error(ErrorCode::UnknownMode, "x")), 2);
    EXPECT_EQ(exit_code(Error(ErrorCode::PlantFailure, "x")), 1);
}

TEST(Config, TargetsFlowIntoStages) {
    auto j = base("pibo");
    j["targets"] = {{"target_porosity", 0.12}, {"ts_threshold", 1.5}};
    const auto c = parse_config(j);
    EXPECT_EQ(c.pibo.target_porosity, 0.12);
    EXPECT_EQ(c.formulator.constraints.theta_sigma, 1.5);
    EXPECT_EQ(c.mobo.config.ts_threshold, 1.5);
    EXPECT_EQ(c.plant.config.targets.target_porosity, 0.12);
}

TEST(Config, SeedsChangeTheHash) {
    const auto a = parse_config(base("pibo"));
    const auto b = parse_config(base("pibo"), 8);
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(a.hash(), parse_config(base("pibo")).hash());
    EXPECT_NE(stage_seed(1, PiboPlant), stage_seed(1, MoboPlant));
}

TEST(Campaign, FormulateSmoke) {
    const auto out = scratch("formulate");
    const auto report = run(parse_config(small_formulate()), out);
    EXPECT_TRUE(report.contains("formulate"));
    EXPECT_TRUE(report.contains("surrogate"));
    for (const auto* f : {"formulation.csv", "dataset.csv", "models/porosity.model", "formulate.json", "manifest.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    const auto manifest = json::parse(read(out / "manifest.json"));
    EXPECT_EQ(manifest["seed"], 7);
    EXPECT_GE(manifest["files"].size(), 4u);
}

TEST(Campaign, SameSeedByteIdentical) {
    const auto c = parse_config(small_formulate());
    const auto a = scratch("det_a"), b = scratch("det_b");
    run(c, a);
    run(c, b);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        EXPECT_EQ(read(entry.path()), read(b / rel)) << rel;
    }
}

TEST(Campaign, ManufactureConsumesAboutThirtyGrams) {
    auto j = base("manufacture");
    j["formulation"] = blend();
    j["manufacture"] = {{"tablets", 100}, {"settings", {{"main_compression", 150}}}};
    const auto r = run(parse_config(j), scratch("manufacture"));
    const auto& s = r["manufacture"]["summary"];
    EXPECT_EQ(s["produced"], 100);
    EXPECT_NEAR(s["powder_consumed_mg"].get<double>() / 1000.0, 31.6, 2.0);
}

TEST(Campaign, PipelineWithoutManufactureHasNoBatch) {
    auto j = base("pipeline");
    j["formulation"] = blend();
    j["mobo"] = {{"enabled", false}};
    j["manufacture"] = {{"enabled", false}};
    j["plant"] = {{"noise", {{"enabled", false}}}, {"elastic_recovery", false}};
    const auto out = scratch("pipeline");
    const auto r = run(parse_config(j), out);
    EXPECT_TRUE(r.contains("pibo"));
    EXPECT_TRUE(r.contains("development"));
    EXPECT_FALSE(r.contains("batch"));
    EXPECT_FALSE(fs::exists(out / "manufacture_log.jsonl"));
    EXPECT_NEAR(r["pibo"]["validation"]["measured_porosity"].get<double>(), 0.15, 0.005);
}

TEST(Campaign, ModesNeedingFormulationSayWhich) {
    expect_error(ErrorCode::ConfigParseError, [] { run(parse_config(base("pibo")), scratch("noform")); });
}

TEST(Campaign, MonitorFlagsInjectedOutliers) {
    auto j = base("monitor");
    j["formulation"] = blend();
    j["monitor"] = {{"spectra", 100}, {"outliers", {20, 60}}};
    const auto out = scratch("monitor");
    const auto r = run(parse_config(j), out);
    const auto flagged = r["monitor"]["flagged_iterations"];
    EXPECT_TRUE(fs::exists(out / "t2_chart.csv"));
    EXPECT_GE(flagged.size(), 2u);
}
