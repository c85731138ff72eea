#include "giks/cli/cli.hpp"

#include "giks/errors.hpp"

#include <fstream>

namespace giks::cli {

using nlohmann::json;

RunConfig run_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("run config must be a JSON object");
    RunConfig rc;
    try {
        for (const auto& [key, v] : doc.items()) {
            if (key == "generator") {
                rc.generator = data::generator_spec_from_json(v);
            } else if (key == "dataset") {
                rc.dataset = v.get<std::string>();
            } else if (key == "training") {
                // Validates keys and values now; applied over the preset later.
                trainer::giks_config_from_json(v);
                rc.training = v;
            } else if (key == "metrics") {
                if (!v.is_object()) throw ConfigError("metrics must be an object");
                for (const auto& [mk, mv] : v.items()) {
                    if (mk == "grid_size") rc.metrics.grid_size = mv.get<std::size_t>();
                    else if (mk == "amse_draws") rc.metrics.amse_draws = mv.get<std::size_t>();
                    else if (mk == "seed") rc.metrics.seed = mv.get<std::uint64_t>();
                    else throw ConfigError("unknown metrics key '" + mk + "'");
                }
            } else if (key == "output_dir") {
                rc.output_dir = v.get<std::string>();
            } else if (key == "seeds") {
                rc.seeds = v.get<std::vector<std::uint64_t>>();
            } else {
                throw ConfigError("unknown run config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    if (rc.metrics.grid_size == 0) throw ConfigError("metrics.grid_size must be >= 1");
    if (rc.metrics.amse_draws == 0) throw ConfigError("metrics.amse_draws must be >= 1");
    return rc;
}

json to_json(const RunConfig& rc) {
    json doc = json::object();
    if (rc.generator) doc["generator"] = data::to_json(*rc.generator);
    if (rc.dataset) doc["dataset"] = *rc.dataset;
    doc["training"] = rc.training;
    doc["metrics"] = {{"grid_size", rc.metrics.grid_size},
                      {"amse_draws", rc.metrics.amse_draws},
                      {"seed", rc.metrics.seed}};
    if (rc.output_dir) doc["output_dir"] = *rc.output_dir;
    doc["seeds"] = rc.seeds;
    return doc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(doc);
}

trainer::GiksConfig resolve_training(const RunConfig& rc,
                                     const std::optional<data::GeneratorKind>& kind) {
    const trainer::GiksConfig base = kind ? trainer::preset(*kind) : trainer::GiksConfig{};
    return trainer::giks_config_from_json(rc.training, base);
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw IntegrityError("failed writing " + path.string());
}

} // namespace giks::cli
