#pragma once

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace tabletlab {

// Library-wide logger on stderr. Level comes from TABLETLAB_LOG
// (trace|debug|info|warn|error|off), default warn.
inline spdlog::logger& log() {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = std::make_shared<spdlog::logger>(
            "tabletlab", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        l->set_pattern("[%l] %v");
        l->set_level(spdlog::level::warn);
        if (const char* env = std::getenv("TABLETLAB_LOG")) {
            l->set_level(spdlog::level::from_str(env));
        }
        return l;
    }();
    return *logger;
}

}  // namespace tabletlab
