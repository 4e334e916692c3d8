#pragma once

// File-based pipeline commands behind the iu4rec tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "iu4rec/config.hpp"

namespace iu4rec::cli {

struct Context {
  PipelineConfig cfg;
  std::filesystem::path out;
  std::uint64_t digest = 0;
};

Context make_context(const std::optional<std::string>& config_path, std::optional<std::uint64_t> seed,
                     const std::filesystem::path& out);

void synth(const Context& ctx);
void build_iu(const Context& ctx);
void featurize(const Context& ctx);
void train(const Context& ctx);
void eval(const Context& ctx);
void simulate(const Context& ctx);
void ab_test(const Context& ctx);
void all(const Context& ctx);

// Reads IU4REC_LOG (error | info | debug) and configures the default logger.
void configure_logging();

}  // namespace iu4rec::cli
