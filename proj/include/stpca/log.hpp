#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace stpca {

/// Library logger writing to stderr. The level comes from the STPCA_LOG
/// environment variable (trace, debug, info, warn, error, off); default warn.
inline spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("stpca");
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("STPCA_LOG")) level = spdlog::level::from_str(env);
    l->set_level(level);
    return l;
  }();
  return *instance;
}

}  // namespace stpca
