#pragma once

#include "giks/data/dataset.hpp"
#include "giks/data/generators.hpp"

#include <filesystem>
#include <optional>

namespace giks::data {

/// Sidecar metadata written next to a dataset CSV.
struct DatasetMeta {
    std::string name;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t d = 0;
    std::optional<GeneratorSpec> generator;
};

void write_meta(const std::filesystem::path& path, const Dataset& d,
                const std::optional<GeneratorSpec>& generator);
// Malformed metadata raises IntegrityError.
DatasetMeta read_meta(const std::filesystem::path& path);

struct LoadedDataset {
    Dataset data;
    // Present only when metadata names a generator; oracle metrics need it.
    std::optional<GeneratorSpec> generator;
};

// Reads the CSV and, when meta_path is given and exists, its metadata.
// A row/column count disagreement between the two raises IntegrityError.
LoadedDataset load_dataset(const std::filesystem::path& csv_path,
                           const std::optional<std::filesystem::path>& meta_path);

} // namespace giks::data
