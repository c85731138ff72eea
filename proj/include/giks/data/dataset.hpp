#pragma once

#include "giks/diffnet/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace giks::data {

/// Observational samples (x_i, t_i, y_i) with t_i ∈ [0,1].
struct Dataset {
    std::string name;
    std::uint64_t seed = 0;
    diffnet::Tensor2 x;
    std::vector<double> t;
    std::vector<double> y;

    std::size_t size() const noexcept { return t.size(); }
    std::size_t dim() const noexcept { return x.cols(); }

    // Throws DimensionError / DomainError when the invariants are broken.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset take_rows(const Dataset& d, std::span<const std::size_t> rows);

struct Split {
    Dataset train;
    Dataset val;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
};

// Seeded shuffle, then the first round(n·val_fraction) rows go to validation.
// Each side keeps its rows in the original order.
Split split(const Dataset& d, double val_fraction, std::uint64_t seed);

// CSV with header x_0..x_{d-1},t,y; values written with 17 significant digits.
void write_csv(const std::filesystem::path& path, const Dataset& d);

// Parses a CSV written by write_csv (or any file with that header). Malformed
// content raises ParseError naming the 1-based line.
Dataset read_csv(const std::filesystem::path& path);

} // namespace giks::data
