#include "giks/model/checkpoint.hpp"

#include "giks/errors.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace giks::model {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "giks-model";
constexpr int kVersion = 1;

template <typename T>
T field(const json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) {
        throw IntegrityError(std::string("checkpoint is missing field '") + key + "'");
    }
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint field '") + key + "': " + e.what());
    }
}

} // namespace

json model_config_to_json(const ModelConfig& config) {
    return json{
        {"encoder",
         {{"input_dim", config.encoder.input_dim},
          {"hidden_dims", config.encoder.hidden_dims},
          {"embed_dim", config.encoder.embed_dim}}},
        {"head_hidden", config.head_hidden},
        {"basis", {{"degree", config.basis.degree}, {"knots", config.basis.knots}}},
        {"seed", config.seed},
    };
}

ModelConfig model_config_from_json(const json& doc) {
    ModelConfig config;
    const json encoder = field<json>(doc, "encoder");
    config.encoder.input_dim = field<std::size_t>(encoder, "input_dim");
    config.encoder.hidden_dims = field<std::vector<std::size_t>>(encoder, "hidden_dims");
    config.encoder.embed_dim = field<std::size_t>(encoder, "embed_dim");
    config.head_hidden = field<std::vector<std::size_t>>(doc, "head_hidden");
    const json basis = field<json>(doc, "basis");
    config.basis.degree = field<int>(basis, "degree");
    config.basis.knots = field<std::vector<double>>(basis, "knots");
    config.seed = field<std::uint64_t>(doc, "seed");
    return config;
}

json model_to_json(const ModelState& model, const json& extra) {
    json params = json::array();
    for (const diffnet::ParamBlock* block : model.params()) {
        params.push_back({{"name", block->name},
                          {"rows", block->value.rows()},
                          {"cols", block->value.cols()},
                          {"values", block->value.storage()}});
    }
    json doc{
        {"format", kFormat},
        {"version", kVersion},
        {"config", model_config_to_json(model.config())},
        {"head", model.head().kind()},
        {"outcome_scale",
         {{"mean", model.outcome_scale.mean}, {"scale", model.outcome_scale.scale}}},
        {"params", std::move(params)},
    };
    if (!extra.is_null()) doc["extra"] = extra;
    return doc;
}

ModelState model_from_json(const json& doc) {
    if (field<std::string>(doc, "format") != kFormat) throw IntegrityError("not a model checkpoint");
    if (field<int>(doc, "version") != kVersion) throw IntegrityError("unsupported checkpoint version");

    ModelConfig config;
    try {
        config = model_config_from_json(field<json>(doc, "config"));
        config.validate();
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("checkpoint config invalid: ") + e.what());
    }
    ModelState model(config);
    if (field<std::string>(doc, "head") != model.head().kind()) {
        throw IntegrityError("checkpoint head kind does not match");
    }
    const json scale = field<json>(doc, "outcome_scale");
    model.outcome_scale.mean = field<double>(scale, "mean");
    model.outcome_scale.scale = field<double>(scale, "scale");
    if (!std::isfinite(model.outcome_scale.mean) || !std::isfinite(model.outcome_scale.scale)) {
        throw IntegrityError("checkpoint outcome scale is not finite");
    }

    const json params = field<json>(doc, "params");
    auto blocks = model.params();
    if (!params.is_array() || params.size() != blocks.size()) {
        throw IntegrityError("checkpoint has " + std::to_string(params.size()) +
                             " parameter blocks, expected " + std::to_string(blocks.size()));
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        diffnet::ParamBlock& block = *blocks[b];
        const json& entry = params[b];
        const auto name = field<std::string>(entry, "name");
        if (name != block.name) {
            throw IntegrityError("parameter block " + std::to_string(b) + " is '" + name +
                                 "', expected '" + block.name + "'");
        }
        const auto rows = field<std::size_t>(entry, "rows");
        const auto cols = field<std::size_t>(entry, "cols");
        auto values = field<std::vector<double>>(entry, "values");
        if (rows != block.value.rows() || cols != block.value.cols() ||
            values.size() != rows * cols) {
            throw IntegrityError("parameter block '" + name + "' has the wrong shape");
        }
        diffnet::Tensor2 value(rows, cols, std::move(values));
        if (!value.all_finite()) throw IntegrityError("parameter block '" + name + "' is not finite");
        block.value = std::move(value);
    }
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& model,
                     const json& extra) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out << model_to_json(model, extra).dump(1) << '\n';
    if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("cannot open checkpoint " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw IntegrityError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    ModelState model = model_from_json(doc);
    json extra = doc.contains("extra") ? doc["extra"] : json(nullptr);
    return Checkpoint{std::move(model), std::move(extra)};
}

} // namespace giks::model
