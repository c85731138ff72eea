#include <doctest.h>

#include "giks/data/dataset.hpp"
#include "giks/data/generators.hpp"
#include "giks/data/io.hpp"
#include "giks/errors.hpp"
#include "support/conformance.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

using namespace giks::data;
namespace fs = std::filesystem;

namespace {

const std::vector<GeneratorKind> kAllKinds{GeneratorKind::SyntheticSimple, GeneratorKind::IhdpLike,
                                           GeneratorKind::NewsLike,        GeneratorKind::Tcga0,
                                           GeneratorKind::Tcga1,           GeneratorKind::Tcga2};

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "giks_test_data";
    fs::create_directories(dir);
    return dir / name;
}

double correlation(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

GeneratedData make(GeneratorKind kind, std::size_t n, std::uint64_t seed, std::size_t test_n = 0) {
    GeneratorSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.noise_seed = seed;
    spec.test_n = test_n;
    return generate(spec);
}

} // namespace

TEST_CASE("split examples") {
    Dataset d;
    d.x = giks::diffnet::Tensor2(10, 1);
    for (int i = 0; i < 10; ++i) {
        d.x(i, 0) = i;
        d.t.push_back(i / 10.0);
        d.y.push_back(i);
    }
    const Split s = split(d, 0.3, 4);
    CHECK(s.train.size() == 7);
    CHECK(s.val.size() == 3);
    std::set<std::size_t> all(s.train_rows.begin(), s.train_rows.end());
    for (std::size_t r : s.val_rows) CHECK(all.insert(r).second);
    CHECK(all.size() == 10);
    const Split again = split(d, 0.3, 4);
    CHECK(again.val_rows == s.val_rows);
    CHECK(s.val.y[0] == static_cast<double>(s.val_rows[0]));
    CHECK_THROWS_AS(split(d, 0.01, 0), giks::ConfigError);
    CHECK_THROWS_AS(split(d, 1.0, 0), giks::ConfigError);
}

TEST_CASE("dataset validation") {
    Dataset d;
    d.x = giks::diffnet::Tensor2(2, 1);
    d.t = {0.5, 1.2};
    d.y = {0.0, 0.0};
    CHECK_THROWS_AS(d.validate(), giks::DomainError);
    d.t = {0.5};
    CHECK_THROWS_AS(d.validate(), giks::DimensionError);
}

TEST_CASE("csv and metadata round trip every generator bitwise") {
    for (GeneratorKind kind : kAllKinds) {
        const auto gen = make(kind, 50, 3);
        const auto csv = scratch(to_string(kind) + ".csv");
        const auto meta = scratch(to_string(kind) + ".json");
        GeneratorSpec spec;
        spec.kind = kind;
        spec.n = 50;
        spec.noise_seed = 3;
        write_csv(csv, gen.data);
        write_meta(meta, gen.data, spec);
        const auto loaded = load_dataset(csv, meta);
        CHECK(loaded.data == gen.data);
        REQUIRE(loaded.generator.has_value());
        CHECK(loaded.generator->kind == kind);
        CHECK(generate(*loaded.generator).data == gen.data);
    }
}

TEST_CASE("malformed csv files raise parse errors naming the line") {
    const auto gen = make(GeneratorKind::SyntheticSimple, 5, 0);
    const auto csv = scratch("trunc.csv");
    write_csv(csv, gen.data);
    std::string content;
    {
        std::ifstream in(csv);
        content.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        std::ofstream out(csv);
        out << content.substr(0, content.size() - 30);
    }
    try {
        read_csv(csv);
        FAIL("expected ParseError");
    } catch (const giks::ParseError& e) {
        CHECK(std::string(e.what()).find("line 6") != std::string::npos);
    }

    {
        std::ofstream out(csv);
        out << "x_0,t,y\n0.1,0.2,0.3\n0.1,abc,0.3\n";
    }
    try {
        read_csv(csv);
        FAIL("expected ParseError");
    } catch (const giks::ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    {
        std::ofstream out(csv);
        out << "a,b,c\n";
    }
    CHECK_THROWS_AS(read_csv(csv), giks::ParseError);
}

TEST_CASE("metadata shape mismatch is an integrity error and external csv loads without it") {
    const auto gen = make(GeneratorKind::SyntheticSimple, 8, 1);
    const auto csv = scratch("ext.csv");
    const auto meta = scratch("ext.json");
    write_csv(csv, gen.data);
    auto shorter = take_rows(gen.data, std::vector<std::size_t>{0, 1, 2});
    write_meta(meta, shorter, std::nullopt);
    CHECK_THROWS_AS(load_dataset(csv, meta), giks::IntegrityError);

    {
        std::ofstream out(meta);
        out << "{\"name\": 3}";
    }
    CHECK_THROWS_AS(load_dataset(csv, meta), giks::IntegrityError);

    const auto bare = load_dataset(csv, std::nullopt);
    CHECK_FALSE(bare.generator.has_value());
    CHECK(bare.data.size() == 8);
    CHECK(bare.data.x == gen.data.x);
}

TEST_CASE("generator spec json rejects unknown keys and bad dimensions") {
    GeneratorSpec spec;
    spec.kind = GeneratorKind::Tcga1;
    spec.n = 30;
    spec.test_n = 7;
    CHECK(generator_spec_from_json(to_json(spec)).kind == GeneratorKind::Tcga1);
    auto doc = to_json(spec);
    doc["colour"] = "red";
    CHECK_THROWS_AS(generator_spec_from_json(doc), giks::ConfigError);
    spec.kind = GeneratorKind::IhdpLike;
    spec.d = 24;
    CHECK_THROWS_AS(spec.validate(), giks::ConfigError);
    spec.kind = GeneratorKind::NewsLike;
    spec.d = 9;
    CHECK_THROWS_AS(spec.validate(), giks::ConfigError);
    CHECK_THROWS_AS(parse_generator_kind("tcga-3"), giks::ConfigError);
}

TEST_CASE("held-out rows do not perturb the data rows") {
    for (GeneratorKind kind : kAllKinds) {
        const auto a = make(kind, 40, 9, 0);
        const auto b = make(kind, 40, 9, 25);
        CHECK(a.data == b.data);
        CHECK(b.test.size() == 25);
    }
}

TEST_CASE("synthetic-simple properties") {
    const auto gen = make(GeneratorKind::SyntheticSimple, 2000, 0);
    std::vector<double> x1(gen.data.size());
    for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = gen.data.x(i, 0);
    CHECK(correlation(gen.data.t, x1) >= 0.3);

    std::vector<int> bins(10, 0);
    for (double t : gen.data.t) bins[std::min(9, static_cast<int>(t * 10))]++;
    for (int c : bins) CHECK(c > 0);

    for (std::size_t i = 0; i < gen.data.size(); ++i) {
        const double mu = gen.oracle(gen.data.x.row_span(i), gen.data.t[i]);
        CHECK(std::abs(gen.data.y[i] - gen.noise[i] - mu) <= 1e-12);
    }
}

TEST_CASE("ihdp-like properties") {
    const auto gen = make(GeneratorKind::IhdpLike, 2000, 1);
    for (double t : gen.data.t) CHECK((t > 0.0 && t < 1.0));
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < gen.data.size(); ++i) {
        const double r = gen.data.y[i] - gen.oracle(gen.data.x.row_span(i), gen.data.t[i]);
        s += r;
        ss += r * r;
    }
    const double n = static_cast<double>(gen.data.size());
    const double sd = std::sqrt((ss - s * s / n) / (n - 1));
    CHECK(std::abs(sd - 0.25) <= 0.05);
}

TEST_CASE("news-like clamp and beta parameters") {
    CHECK(news_clamp(10.0) == 2.0);
    CHECK(news_clamp(-7.0) == -2.0);
    CHECK(news_clamp(0.3) == 0.3);
    const auto gen = make(GeneratorKind::NewsLike, 500, 2);
    CHECK(gen.beta_a == 2.0);
    for (double b : gen.beta_b) CHECK(b >= 0.0);
    for (std::size_t i = 0; i < gen.data.size(); ++i) {
        double norm = 0.0;
        for (double v : gen.data.x.row_span(i)) {
            CHECK(v >= 0.0);
            norm += v * v;
        }
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tcga formulas") {
    CHECK(tcga_beta_param(2.0, 0.25) == doctest::Approx(4.0));
    CHECK(tcga_beta_param(2.0, 0.8) == doctest::Approx(1.0 / 0.8));
    CHECK(tcga_beta_param(3.0, 0.5) == doctest::Approx(2.0 / 0.5 - 1.0));
    CHECK(tcga_optimal_dose(0, 0.6, 0.5) == doctest::Approx(0.6));
    CHECK(tcga_optimal_dose(1, 0.5, 0.6) == doctest::Approx(0.6));
    CHECK(tcga_optimal_dose(2, 2.0, 1.0) == doctest::Approx(0.5));
    CHECK(tcga_optimal_dose(2, 0.5, 1.0) == 1.0);
    // The closed-form dose maximizes the response on a fine grid.
    for (int variant = 0; variant < 3; ++variant) {
        const double v2x = 0.9;
        const double v3x = 0.7;
        const double star = std::clamp(tcga_optimal_dose(variant, v2x, v3x), 0.0, 1.0);
        const double best = tcga_response(variant, 0.1, v2x, v3x, star);
        for (int g = 0; g <= 1000; ++g)
            CHECK(tcga_response(variant, 0.1, v2x, v3x, g / 1000.0) <= best + 1e-12);
    }
}

TEST_CASE("generator conformance suite on a few seeds") {
    giks::testing::ConformanceOptions opt;
    opt.beta_n = 4000;
    opt.ks_limit = 0.035;
    for (GeneratorKind kind : kAllKinds) {
        for (std::uint64_t seed : {0, 1, 2}) {
            const auto failures = giks::testing::check_generator(kind, seed, opt);
            for (const auto& f : failures) MESSAGE(f);
            CHECK(failures.empty());
        }
    }
}

TEST_CASE("dosage distribution follows the direct Beta law at 10^4 draws") {
    for (GeneratorKind kind : {GeneratorKind::NewsLike, GeneratorKind::Tcga0}) {
        const auto gen = make(kind, 10000, 11);
        std::vector<double> u(gen.data.size());
        std::mt19937_64 rng(1);
        for (std::size_t i = 0; i < u.size(); ++i)
            u[i] = giks::testing::beta_pit(gen.beta_a, gen.beta_b[i], gen.data.t[i], rng);
        CHECK(giks::testing::ks_uniform(u) < 0.02);
    }
}
