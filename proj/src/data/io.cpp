#include "giks/data/io.hpp"

#include "giks/errors.hpp"

#include <fstream>

namespace giks::data {

using nlohmann::json;

void write_meta(const std::filesystem::path& path, const Dataset& d,
                const std::optional<GeneratorSpec>& generator) {
    json doc{{"name", d.name},
             {"seed", d.seed},
             {"n", d.size()},
             {"d", d.dim()},
             {"generator", generator ? to_json(*generator) : json(nullptr)}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

DatasetMeta read_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("cannot open metadata " + path.string());
    DatasetMeta meta;
    try {
        const json doc = json::parse(in);
        meta.name = doc.at("name").get<std::string>();
        meta.seed = doc.at("seed").get<std::uint64_t>();
        meta.n = doc.at("n").get<std::size_t>();
        meta.d = doc.at("d").get<std::size_t>();
        const json& gen = doc.at("generator");
        if (!gen.is_null()) meta.generator = generator_spec_from_json(gen);
    } catch (const json::exception& e) {
        throw IntegrityError("metadata " + path.string() + " is malformed: " + e.what());
    } catch (const ConfigError& e) {
        throw IntegrityError("metadata " + path.string() + " has an invalid generator: " + e.what());
    }
    return meta;
}

LoadedDataset load_dataset(const std::filesystem::path& csv_path,
                           const std::optional<std::filesystem::path>& meta_path) {
    LoadedDataset out;
    out.data = read_csv(csv_path);
    if (meta_path && std::filesystem::exists(*meta_path)) {
        const DatasetMeta meta = read_meta(*meta_path);
        if (meta.n != out.data.size() || meta.d != out.data.dim()) {
            throw IntegrityError("metadata says " + std::to_string(meta.n) + "x" +
                                 std::to_string(meta.d) + " but " + csv_path.string() + " holds " +
                                 std::to_string(out.data.size()) + "x" +
                                 std::to_string(out.data.dim()));
        }
        if (meta.generator && meta.generator->n != meta.n) {
            throw IntegrityError("metadata generator size does not match the dataset");
        }
        out.data.name = meta.name;
        out.data.seed = meta.seed;
        out.generator = meta.generator;
    }
    return out;
}

} // namespace giks::data
