#pragma once

#include "giks/model/vcnet.hpp"

#include <json.hpp>

#include <filesystem>

namespace giks::model {

/// Serialized model: config, basis, outcome scale and one flat value array per
/// parameter block. `extra` is stored verbatim under "extra".
nlohmann::json model_to_json(const ModelState& model, const nlohmann::json& extra = nullptr);

// Throws IntegrityError when blocks are missing, misnamed, misshapen or
// non-finite.
ModelState model_from_json(const nlohmann::json& doc);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

struct Checkpoint {
    ModelState model;
    nlohmann::json extra;
};

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const nlohmann::json& extra = nullptr);
// Unreadable or malformed files raise IntegrityError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace giks::model
