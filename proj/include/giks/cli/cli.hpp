#pragma once

#include "giks/data/generators.hpp"
#include "giks/trainer/trainer.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace giks::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTrainingAbort = 3;
inline constexpr int kExitCorrupt = 4;

struct MetricOptions {
    std::size_t grid_size = 65;
    std::size_t amse_draws = 200;
    std::uint64_t seed = 0;
};

/// JSON run description shared by train and sweep. Training keys are kept as
/// raw overrides so they can be laid over the dataset's preset later.
struct RunConfig {
    std::optional<data::GeneratorSpec> generator;
    std::optional<std::string> dataset;
    nlohmann::json training = nlohmann::json::object();
    MetricOptions metrics;
    std::optional<std::string> output_dir;
    std::vector<std::uint64_t> seeds;
};

// Unknown keys at any level raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::filesystem::path& path);

// Preset for the generator kind (defaults when unknown), then the config's
// training overrides.
trainer::GiksConfig resolve_training(const RunConfig& config,
                                     const std::optional<data::GeneratorKind>& kind);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

/// Entry point for the `giks` executable. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace giks::cli
