#include "giks/data/generators.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace giks::data {

using diffnet::Tensor2;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
// Projections smaller than this in magnitude are treated as zero.
constexpr double kTinyProjection = 1e-12;

// Independent streams so that the first n rows do not depend on test_n.
struct Streams {
    std::mt19937_64 directions;
    std::mt19937_64 covariates;
    std::mt19937_64 treatment;
    std::mt19937_64 outcome;

    explicit Streams(std::uint64_t seed)
        : directions(make(seed, 0)), covariates(make(seed, 1)), treatment(make(seed, 2)),
          outcome(make(seed, 3)) {}

    static std::mt19937_64 make(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream)};
        return std::mt19937_64(seq);
    }
};

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> unit_direction(std::size_t d, std::mt19937_64& rng, bool non_negative) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& e : v) {
            e = normal(rng);
            if (non_negative) e = std::abs(e);
            norm += e * e;
        }
        norm = std::sqrt(norm);
    } while (norm < kTinyProjection);
    for (double& e : v) e /= norm;
    return v;
}

double sample_beta(double a, double b, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double u = ga(rng);
    const double v = gb(rng);
    if (u + v <= 0.0) return 0.5;
    return u / (u + v);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Splits N generated rows into the first n (data) and the remaining (test).
GeneratedData assemble(const GeneratorSpec& spec, Tensor2 x, std::vector<double> t,
                       std::vector<double> y, std::vector<double> noise, ResponseOracle oracle,
                       std::size_t resampled, double beta_a = 0.0,
                       std::vector<double> beta_b = {}) {
    Dataset all;
    all.name = to_string(spec.kind);
    all.seed = spec.noise_seed;
    all.x = std::move(x);
    all.t = std::move(t);
    all.y = std::move(y);
    all.validate();

    std::vector<std::size_t> head(spec.n);
    std::vector<std::size_t> tail(spec.test_n);
    for (std::size_t i = 0; i < spec.n; ++i) head[i] = i;
    for (std::size_t i = 0; i < spec.test_n; ++i) tail[i] = spec.n + i;

    GeneratedData out{take_rows(all, head), take_rows(all, tail), std::move(oracle), {}, {}, resampled, 0.0, {}};
    out.test.name = all.name + "-test";
    out.noise.assign(noise.begin(), noise.begin() + static_cast<std::ptrdiff_t>(spec.n));
    out.test_noise.assign(noise.begin() + static_cast<std::ptrdiff_t>(spec.n), noise.end());
    if (!beta_b.empty()) {
        out.beta_a = beta_a;
        out.beta_b.assign(beta_b.begin(), beta_b.begin() + static_cast<std::ptrdiff_t>(spec.n));
    }
    return out;
}

} // namespace

std::string to_string(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::SyntheticSimple: return "synthetic-simple";
    case GeneratorKind::IhdpLike: return "ihdp";
    case GeneratorKind::NewsLike: return "news";
    case GeneratorKind::Tcga0: return "tcga-0";
    case GeneratorKind::Tcga1: return "tcga-1";
    case GeneratorKind::Tcga2: return "tcga-2";
    }
    return "unknown";
}

GeneratorKind parse_generator_kind(const std::string& name) {
    for (GeneratorKind k : {GeneratorKind::SyntheticSimple, GeneratorKind::IhdpLike,
                            GeneratorKind::NewsLike, GeneratorKind::Tcga0, GeneratorKind::Tcga1,
                            GeneratorKind::Tcga2}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown generator kind '" + name + "'");
}

bool is_tcga(GeneratorKind kind) noexcept {
    return kind == GeneratorKind::Tcga0 || kind == GeneratorKind::Tcga1 ||
           kind == GeneratorKind::Tcga2;
}

std::size_t GeneratorSpec::resolved_dim() const {
    if (d != 0) return d;
    switch (kind) {
    case GeneratorKind::SyntheticSimple: return 6;
    case GeneratorKind::IhdpLike: return 25;
    default: return 20;
    }
}

void GeneratorSpec::validate() const {
    if (n == 0) throw ConfigError("generator needs n >= 1");
    const std::size_t dim = resolved_dim();
    if (kind == GeneratorKind::SyntheticSimple && dim != 6) {
        throw ConfigError("synthetic-simple requires d = 6");
    }
    if (kind == GeneratorKind::IhdpLike && dim != 25) throw ConfigError("ihdp requires d = 25");
    if ((kind == GeneratorKind::NewsLike || is_tcga(kind)) && dim < 10) {
        throw ConfigError(to_string(kind) + " requires d >= 10");
    }
    if (!(dosage_bias >= 1.0) || !std::isfinite(dosage_bias)) {
        throw ConfigError("dosage_bias must be >= 1");
    }
}

json to_json(const GeneratorSpec& spec) {
    return json{{"kind", to_string(spec.kind)},     {"n", spec.n},
                {"d", spec.resolved_dim()},         {"noise_seed", spec.noise_seed},
                {"dosage_bias", spec.dosage_bias},  {"test_n", spec.test_n}};
}

GeneratorSpec generator_spec_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("generator spec must be an object");
    GeneratorSpec spec;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "kind") spec.kind = parse_generator_kind(value.get<std::string>());
            else if (key == "n") spec.n = value.get<std::size_t>();
            else if (key == "d") spec.d = value.get<std::size_t>();
            else if (key == "noise_seed") spec.noise_seed = value.get<std::uint64_t>();
            else if (key == "dosage_bias") spec.dosage_bias = value.get<double>();
            else if (key == "test_n") spec.test_n = value.get<std::size_t>();
            else throw ConfigError("unknown generator key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------

std::vector<double> ResponseOracle::predict(const Tensor2& x, std::span<const double> t) const {
    if (t.size() != x.rows()) throw DimensionError("treatment count does not match rows");
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = mu_(x.row_span(i), t[i]);
    return out;
}

double ResponseOracle::grid_best_dose(std::span<const double> x) const {
    double best_t = 0.0;
    double best = mu_(x, 0.0);
    for (std::size_t g = 1; g <= kDoseGrid; ++g) {
        const double t = static_cast<double>(g) / static_cast<double>(kDoseGrid);
        const double v = mu_(x, t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    return best_t;
}

double ResponseOracle::best_dose(std::span<const double> x) const {
    if (closed_form_) return std::clamp(closed_form_(x), 0.0, 1.0);
    return grid_best_dose(x);
}

// ---------------------------------------------------------------------------

GeneratedData generate(const GeneratorSpec& spec) {
    switch (spec.kind) {
    case GeneratorKind::SyntheticSimple: return gen_synthetic_simple(spec);
    case GeneratorKind::IhdpLike: return gen_ihdp_like(spec);
    case GeneratorKind::NewsLike: return gen_news_like(spec);
    case GeneratorKind::Tcga0: return gen_tcga(spec, 0);
    case GeneratorKind::Tcga1: return gen_tcga(spec, 1);
    case GeneratorKind::Tcga2: return gen_tcga(spec, 2);
    }
    throw ConfigError("unknown generator kind");
}

GeneratedData gen_synthetic_simple(const GeneratorSpec& spec) {
    spec.validate();
    if (spec.kind != GeneratorKind::SyntheticSimple) throw ConfigError("spec kind mismatch");
    const std::size_t total = spec.n + spec.test_n;
    Streams rng(spec.noise_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> t_noise(0.0, 0.3);
    std::normal_distribution<double> y_noise(0.0, 0.1);

    auto mu = [](std::span<const double> x, double t) {
        return std::sin(3.0 * kPi * t) * (x[0] + x[2]) + (t - 0.5) * (t - 0.5) * x[1] + x[3];
    };

    Tensor2 x(total, 6);
    std::vector<double> t(total);
    std::vector<double> y(total);
    std::vector<double> noise(total);
    for (std::size_t i = 0; i < total; ++i) {
        auto row = x.row_span(i);
        for (double& v : row) v = unit(rng.covariates);
        t[i] = std::clamp((row[0] + row[1]) / 2.0 + t_noise(rng.treatment), 0.0, 1.0);
        noise[i] = y_noise(rng.outcome);
        y[i] = mu(row, t[i]) + noise[i];
    }
    return assemble(spec, std::move(x), std::move(t), std::move(y), std::move(noise),
                    ResponseOracle(mu), 0);
}

GeneratedData gen_ihdp_like(const GeneratorSpec& spec) {
    spec.validate();
    if (spec.kind != GeneratorKind::IhdpLike) throw ConfigError("spec kind mismatch");
    const std::size_t total = spec.n + spec.test_n;
    Streams rng(spec.noise_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> t_noise(0.0, 0.25);
    std::normal_distribution<double> y_noise(0.0, 0.25);

    // 1-based covariate indices.
    const std::vector<std::size_t> continuous{1, 2, 3, 5, 6};
    const std::vector<std::size_t> dis1{4, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    const std::vector<std::size_t> dis2{16, 17, 18, 19, 20, 21, 22, 23, 24, 25};
    auto is_continuous = [&](std::size_t j) {
        return std::find(continuous.begin(), continuous.end(), j) != continuous.end();
    };

    Tensor2 x(total, 25);
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = 1; j <= 25; ++j)
            x(i, j - 1) = is_continuous(j) ? unit(rng.covariates) : (coin(rng.covariates) ? 1.0 : 0.0);
    }
    auto group_mean = [](std::span<const double> row, const std::vector<std::size_t>& idx) {
        double s = 0.0;
        for (std::size_t j : idx) s += row[j - 1];
        return s / static_cast<double>(idx.size());
    };
    // c1, c2 are means over the data rows only, so held-out rows do not shift them.
    double c1 = 0.0;
    double c2 = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
        c1 += group_mean(x.row_span(i), dis1);
        c2 += group_mean(x.row_span(i), dis2);
    }
    c1 /= static_cast<double>(spec.n);
    c2 /= static_cast<double>(spec.n);

    auto mu = [c1, dis1, group_mean](std::span<const double> r, double t) {
        const double x1 = r[0], x2 = r[1], x3 = r[2], x5 = r[4], x6 = r[5];
        const double a = 5.0 * (group_mean(r, dis1) - c1);
        return std::sin(3.0 * kPi * t) / (1.2 - t) * std::tanh(a) +
               std::exp(0.2 * (x1 - x6)) / (0.5 + 5.0 * std::min({x2, x3, x5}));
    };

    std::vector<double> t(total);
    std::vector<double> y(total);
    std::vector<double> noise(total);
    for (std::size_t i = 0; i < total; ++i) {
        const auto r = x.row_span(i);
        const double x1 = r[0], x2 = r[1], x3 = r[2], x5 = r[4], x6 = r[5];
        const double b = 5.0 * (group_mean(r, dis2) - c2);
        const double t_tilde = 2.0 * x1 / (1.0 + x2) +
                               2.0 * std::max({x3, x5, x6}) / (0.2 + std::min({x3, x5, x6})) +
                               2.0 * std::tanh(b - 4.0 + t_noise(rng.treatment));
        t[i] = sigmoid(t_tilde);
        noise[i] = y_noise(rng.outcome);
        y[i] = mu(r, t[i]) + noise[i];
    }
    return assemble(spec, std::move(x), std::move(t), std::move(y), std::move(noise),
                    ResponseOracle(mu), 0);
}

double news_clamp(double y_prime) { return std::max(-2.0, std::min(2.0, y_prime)); }

GeneratedData gen_news_like(const GeneratorSpec& spec) {
    spec.validate();
    if (spec.kind != GeneratorKind::NewsLike) throw ConfigError("spec kind mismatch");
    const std::size_t d = spec.resolved_dim();
    const std::size_t total = spec.n + spec.test_n;
    Streams rng(spec.noise_seed);
    const auto v1 = unit_direction(d, rng.directions, false);
    const auto v2 = unit_direction(d, rng.directions, false);
    const auto v3 = unit_direction(d, rng.directions, false);
    std::bernoulli_distribution nonzero(0.2);
    std::poisson_distribution<int> counts(2.0);
    std::normal_distribution<double> y_noise(0.0, 0.5);

    auto amplitude = [v1, v2, v3](std::span<const double> r) {
        const double y_prime = std::exp(dot(v2, r) / dot(v3, r) - 0.3);
        return 2.0 * (news_clamp(y_prime) + 20.0 * dot(v1, r));
    };
    auto shape = [](double t) {
        return 4.0 * (t - 0.5) * (t - 0.5) + std::sin(kPi / 2.0 * t);
    };
    auto mu = [amplitude, shape](std::span<const double> r, double t) {
        return amplitude(r) * shape(t);
    };

    Tensor2 x(total, d);
    std::vector<double> t(total);
    std::vector<double> y(total);
    std::vector<double> noise(total);
    std::vector<double> beta_b(total);
    std::size_t resampled = 0;
    for (std::size_t i = 0; i < total; ++i) {
        auto row = x.row_span(i);
        while (true) {
            double norm = 0.0;
            for (double& v : row) {
                v = nonzero(rng.covariates) ? static_cast<double>(counts(rng.covariates) + 1) : 0.0;
                norm += v * v;
            }
            norm = std::sqrt(norm);
            if (norm > 0.0)
                for (double& v : row) v /= norm;
            if (std::abs(dot(v2, row)) > kTinyProjection && std::abs(dot(v3, row)) > kTinyProjection)
                break;
            ++resampled;
        }
        beta_b[i] = std::abs(dot(v3, row) / (2.0 * dot(v2, row)));
        t[i] = sample_beta(2.0, beta_b[i], rng.treatment);
        noise[i] = y_noise(rng.outcome);
        y[i] = amplitude(row) * (shape(t[i]) + noise[i]);
    }
    return assemble(spec, std::move(x), std::move(t), std::move(y), std::move(noise),
                    ResponseOracle(mu), resampled, 2.0, std::move(beta_b));
}

double tcga_response(int variant, double v1x, double v2x, double v3x, double dose) {
    switch (variant) {
    case 0: return 10.0 * (v1x + 12.0 * dose * v2x - 12.0 * dose * dose * v3x);
    case 1: return 10.0 * (v1x + std::sin(kPi * (v2x / v3x) * dose));
    case 2: {
        const double gap = dose - 0.75 * (v2x / v3x);
        return 10.0 * (v1x + 12.0 * dose * gap * gap);
    }
    default: throw ConfigError("tcga variant must be 0, 1 or 2");
    }
}

double tcga_optimal_dose(int variant, double v2x, double v3x) {
    switch (variant) {
    case 0: return v2x / (2.0 * v3x);
    case 1: return v3x / (2.0 * v2x);
    case 2: {
        const double r = v2x / v3x;
        return r >= 1.0 ? 0.25 * r : 1.0;
    }
    default: throw ConfigError("tcga variant must be 0, 1 or 2");
    }
}

double tcga_beta_param(double dosage_bias, double optimal_dose) {
    const double d_star = std::clamp(optimal_dose, 1e-6, 1.0);
    return (dosage_bias - 1.0) / d_star + 2.0 - dosage_bias;
}

GeneratedData gen_tcga(const GeneratorSpec& spec, int variant) {
    spec.validate();
    if (variant < 0 || variant > 2) throw ConfigError("tcga variant must be 0, 1 or 2");
    const GeneratorKind expected = variant == 0   ? GeneratorKind::Tcga0
                                   : variant == 1 ? GeneratorKind::Tcga1
                                                  : GeneratorKind::Tcga2;
    if (spec.kind != expected) throw ConfigError("spec kind mismatch");
    const std::size_t d = spec.resolved_dim();
    const std::size_t total = spec.n + spec.test_n;
    Streams rng(spec.noise_seed);
    const auto v1 = unit_direction(d, rng.directions, true);
    const auto v2 = unit_direction(d, rng.directions, true);
    const auto v3 = unit_direction(d, rng.directions, true);
    std::lognormal_distribution<double> lognormal(0.0, 1.0);
    std::normal_distribution<double> y_noise(0.0, 0.2);

    auto mu = [variant, v1, v2, v3](std::span<const double> r, double t) {
        return tcga_response(variant, dot(v1, r), dot(v2, r), dot(v3, r), t);
    };
    auto best = [variant, v2, v3](std::span<const double> r) {
        return tcga_optimal_dose(variant, dot(v2, r), dot(v3, r));
    };

    Tensor2 x(total, d);
    std::vector<double> t(total);
    std::vector<double> y(total);
    std::vector<double> noise(total);
    std::vector<double> beta_b(total);
    std::size_t resampled = 0;
    for (std::size_t i = 0; i < total; ++i) {
        auto row = x.row_span(i);
        while (true) {
            double mean = 0.0;
            for (double& v : row) {
                v = lognormal(rng.covariates);
                mean += v;
            }
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (double v : row) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / static_cast<double>(d));
            if (sd > 0.0)
                for (double& v : row) v /= sd;
            if (sd > 0.0 && std::abs(dot(v2, row)) > kTinyProjection &&
                std::abs(dot(v3, row)) > kTinyProjection)
                break;
            ++resampled;
        }
        beta_b[i] = tcga_beta_param(spec.dosage_bias, best(row));
        t[i] = sample_beta(spec.dosage_bias, beta_b[i], rng.treatment);
        noise[i] = y_noise(rng.outcome);
        y[i] = mu(row, t[i]) + noise[i];
    }
    return assemble(spec, std::move(x), std::move(t), std::move(y), std::move(noise),
                    ResponseOracle(mu, best), resampled, spec.dosage_bias, std::move(beta_b));
}

} // namespace giks::data
