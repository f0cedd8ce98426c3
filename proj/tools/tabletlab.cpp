#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tabletlab/tabletlab.hpp"

namespace campaign = tabletlab::campaign;

int main(int argc, char** argv) {
    CLI::App app{"Virtual tablet development campaigns"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    std::vector<std::string> names = campaign::modes();
    names.insert(names.begin(), "run");
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name, name == "run" ? "run the mode named in the config" : "run the " + name + " stage");
        sub->add_option("-c,--config", config_path, "JSON campaign config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("-o,--out", out, "output directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        auto cfg = campaign::load_config(config_path, seed);
        if (command != "run" && command != cfg.mode) {
            tabletlab::log().info("config mode '{}' overridden by '{}'", cfg.mode, command);
            cfg.mode = command;
        }
        const auto dir = out ? std::filesystem::path(*out) : cfg.output;
        campaign::run(cfg, dir);
        std::cout << (dir / (cfg.mode + ".json")).string() << "\n";
        return 0;
    } catch (const tabletlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return campaign::exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
