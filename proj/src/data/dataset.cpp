#include "giks/data/dataset.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace giks::data {

void Dataset::validate() const {
    if (t.size() != x.rows() || y.size() != x.rows()) {
        throw DimensionError("dataset '" + name + "' has inconsistent lengths");
    }
    if (!x.all_finite()) throw DomainError("dataset '" + name + "' has non-finite covariates");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] >= 0.0 && t[i] <= 1.0)) {
            throw DomainError("dataset '" + name + "' row " + std::to_string(i) +
                              " has treatment outside [0,1]");
        }
        if (!std::isfinite(y[i])) {
            throw DomainError("dataset '" + name + "' row " + std::to_string(i) +
                              " has a non-finite outcome");
        }
    }
}

Dataset take_rows(const Dataset& d, std::span<const std::size_t> rows) {
    Dataset out;
    out.name = d.name;
    out.seed = d.seed;
    out.x = diffnet::select_rows(d.x, rows);
    out.t.reserve(rows.size());
    out.y.reserve(rows.size());
    for (std::size_t r : rows) {
        out.t.push_back(d.t.at(r));
        out.y.push_back(d.y.at(r));
    }
    return out;
}

Split split(const Dataset& d, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in (0,1)");
    }
    const std::size_t n = d.size();
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
    if (n_val == 0 || n_val >= n) {
        throw ConfigError("split of " + std::to_string(n) + " rows leaves one side empty");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    Split s;
    s.val_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(s.val_rows.begin(), s.val_rows.end());
    std::sort(s.train_rows.begin(), s.train_rows.end());
    s.train = take_rows(d, s.train_rows);
    s.val = take_rows(d, s.val_rows);
    return s;
}

namespace {

void append_number(std::string& line, double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    line.append(buf, static_cast<std::size_t>(len));
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" +
                         std::string(field) + "'");
    }
    return v;
}

} // namespace

void write_csv(const std::filesystem::path& path, const Dataset& d) {
    d.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    std::string line;
    for (std::size_t j = 0; j < d.dim(); ++j) line += "x_" + std::to_string(j) + ",";
    line += "t,y\n";
    out << line;
    for (std::size_t i = 0; i < d.size(); ++i) {
        line.clear();
        for (double v : d.x.row_span(i)) {
            append_number(line, v);
            line += ',';
        }
        append_number(line, d.t[i]);
        line += ',';
        append_number(line, d.y[i]);
        line += '\n';
        out << line;
    }
    if (!out) throw Error("failed writing " + path.string());
}

Dataset read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    if (content.empty()) throw ParseError("line 1: empty file " + path.string());

    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t dim = 0;
    Dataset d;
    d.name = path.stem().string();
    std::vector<double> xs;
    while (pos < content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1) {
            const auto header = split_fields(line);
            if (header.size() < 3) throw ParseError("line 1: header needs x columns, t and y");
            dim = header.size() - 2;
            for (std::size_t j = 0; j < dim; ++j) {
                if (header[j] != "x_" + std::to_string(j)) {
                    throw ParseError("line 1: expected column x_" + std::to_string(j));
                }
            }
            if (header[dim] != "t" || header[dim + 1] != "y") {
                throw ParseError("line 1: last columns must be t,y");
            }
            continue;
        }
        if (line.empty()) {
            if (pos >= content.size()) break;
            throw ParseError("line " + std::to_string(line_no) + ": empty line");
        }
        const auto fields = split_fields(line);
        if (fields.size() != dim + 2) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(dim + 2) + " fields, found " +
                             std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < dim; ++j) xs.push_back(parse_number(fields[j], line_no));
        const double t = parse_number(fields[dim], line_no);
        if (!(t >= 0.0 && t <= 1.0)) {
            throw ParseError("line " + std::to_string(line_no) + ": treatment outside [0,1]");
        }
        d.t.push_back(t);
        d.y.push_back(parse_number(fields[dim + 1], line_no));
    }
    if (line_no == 0) throw ParseError("line 1: missing header");
    if (!content.empty() && content.back() != '\n') {
        throw ParseError("line " + std::to_string(line_no) + ": truncated (no final newline)");
    }
    d.x = diffnet::Tensor2(d.t.size(), dim, std::move(xs));
    d.validate();
    return d;
}

} // namespace giks::data
