#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "commands.hpp"

int main(int argc, char** argv) {
  iu4rec::cli::configure_logging();

  CLI::App app{"iu4rec: interest-unit recommendation pipeline on a synthetic marketplace"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  app.add_option("--config", config_path, "JSON config file (defaults are built in)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "derive every stage seed from this value");
  app.add_option("--out", out, "output directory")->capture_default_str();

  using Command = std::function<void(const iu4rec::cli::Context&)>;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"synth", {"generate the world and the logged interaction days", iu4rec::cli::synth}},
      {"build-iu", {"construct interest units and the coverage table", iu4rec::cli::build_iu}},
      {"featurize", {"build training samples and daily IU statistics", iu4rec::cli::featurize}},
      {"train", {"train the configured CTR models", iu4rec::cli::train}},
      {"eval", {"score the test day and write the AUC report", iu4rec::cli::eval}},
      {"simulate", {"serve the two-stage surface with one model", iu4rec::cli::simulate}},
      {"ab-test", {"compare two models on the simulated surface", iu4rec::cli::ab_test}},
      {"all", {"run every stage in order", iu4rec::cli::all}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto ctx = iu4rec::cli::make_context(config_path, seed, out);
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) entry.second(ctx);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
