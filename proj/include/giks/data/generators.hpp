#pragma once

#include "giks/data/dataset.hpp"
#include "giks/dose_response.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace giks::data {

enum class GeneratorKind { SyntheticSimple, IhdpLike, NewsLike, Tcga0, Tcga1, Tcga2 };

// Names: synthetic-simple, ihdp, news, tcga-0, tcga-1, tcga-2.
std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& name);
bool is_tcga(GeneratorKind kind) noexcept;

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::SyntheticSimple;
    std::size_t n = 700;
    // 0 selects the kind's default (6, 25, 20, 20).
    std::size_t d = 0;
    std::uint64_t noise_seed = 0;
    // TCGA dosage selection bias Φ.
    double dosage_bias = 2.0;
    // Extra rows drawn from the same generator and held out for evaluation.
    std::size_t test_n = 0;

    std::size_t resolved_dim() const;
    void validate() const;

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

nlohmann::json to_json(const GeneratorSpec& spec);
// Unknown keys are rejected with ConfigError.
GeneratorSpec generator_spec_from_json(const nlohmann::json& doc);

/// Noise-free response μ(x,t) of a generator, with its best dose.
class ResponseOracle final : public DoseResponse {
public:
    using Fn = std::function<double(std::span<const double>, double)>;
    using DoseFn = std::function<double(std::span<const double>)>;

    static constexpr std::size_t kDoseGrid = 1000;

    explicit ResponseOracle(Fn mu, DoseFn closed_form_best = {})
        : mu_(std::move(mu)), closed_form_(std::move(closed_form_best)) {}

    double operator()(std::span<const double> x, double t) const { return mu_(x, t); }
    std::vector<double> predict(const diffnet::Tensor2& x,
                                std::span<const double> t) const override;

    // Closed form when the generator has one, otherwise grid_best_dose.
    double best_dose(std::span<const double> x) const;
    // Argmax over t = g/1000, g = 0..1000; ties go to the smaller t.
    double grid_best_dose(std::span<const double> x) const;
    bool has_closed_form() const noexcept { return static_cast<bool>(closed_form_); }

private:
    Fn mu_;
    DoseFn closed_form_;
};

struct GeneratedData {
    Dataset data;
    Dataset test;
    ResponseOracle oracle;
    // Outcome noise injected into data rows (for NEWS, the noise inside the
    // multiplicative factor).
    std::vector<double> noise;
    std::vector<double> test_noise;
    // Rows redrawn because a projection ratio was undefined.
    std::size_t resampled_rows = 0;
    // Beta(a, b_i) treatment law of each data row, for Beta-assigned kinds
    // (news, tcga); empty otherwise.
    double beta_a = 0.0;
    std::vector<double> beta_b;
};

GeneratedData generate(const GeneratorSpec& spec);

GeneratedData gen_synthetic_simple(const GeneratorSpec& spec);
GeneratedData gen_ihdp_like(const GeneratorSpec& spec);
GeneratedData gen_news_like(const GeneratorSpec& spec);
// variant 0, 1 or 2.
GeneratedData gen_tcga(const GeneratorSpec& spec, int variant);

// Response pieces exposed for tests.
double news_clamp(double y_prime);
double tcga_response(int variant, double v1x, double v2x, double v3x, double dose);
double tcga_optimal_dose(int variant, double v2x, double v3x);
double tcga_beta_param(double dosage_bias, double optimal_dose);

} // namespace giks::data
