#pragma once

#include "giks/data/dataset.hpp"
#include "giks/data/generators.hpp"
#include "giks/diffnet/tensor.hpp"
#include "giks/dose_response.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace giks::metrics {

inline constexpr std::size_t kDefaultGridSize = 65;
inline constexpr std::size_t kDefaultAmseDraws = 200;

// sqrt(mean_i (y_i − ŷ(x_i, t_i))²)
double factual_rmse(const DoseResponse& model, const data::Dataset& test);

// Midpoint grid t_g = (g + 0.5)/G, g = 0..G-1.
std::vector<double> midpoint_grid(std::size_t grid_size);

// sqrt((1/N) Σ_i (1/G) Σ_g (μ(x_i,t_g) − ŷ(x_i,t_g))²). A missing oracle
// raises UnavailableMetricError.
double cf_error(const DoseResponse& model, const data::Dataset& test,
                const data::ResponseOracle* oracle, std::size_t grid_size = kDefaultGridSize);

// (1/N) Σ_i mean over `draws` treatments sampled (seeded, independently per
// instance) from train_treatments of (μ(x_i,t) − ŷ(x_i,t))². No square root.
double amse(const DoseResponse& model, const data::Dataset& test,
            const data::ResponseOracle* oracle, std::span<const double> train_treatments,
            std::uint64_t seed, std::size_t draws = kDefaultAmseDraws);

// Argmax of the model over t = g/1000 (ties to the smaller t).
double model_best_dose(const DoseResponse& model, std::span<const double> x);

// (1/N) Σ_i (μ(x_i, t*_i) − μ(x_i, t̂_i))².
double dpe(const DoseResponse& model, const data::Dataset& test,
           const data::ResponseOracle* oracle);

// Median of pairwise Euclidean distances between rows; used as RBF bandwidth.
double median_bandwidth(const diffnet::Tensor2& a);

// Biased HSIC: trace(K H L H)/(n−1)² with RBF kernels exp(−‖u−v‖²/(2s²)) and
// median-heuristic bandwidths (1.0 when the median distance is 0). n ≥ 4.
double hsic(const diffnet::Tensor2& a, const diffnet::Tensor2& b);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);
// P(T > t) for Student t with df degrees of freedom.
double student_t_upper_tail(double t, double df);

/// One-sided paired t-test of H1: mean(a) > mean(b). Degenerate differences
/// (variance < 1e-24) give p = 0, 1 or 0.5 by the sign of the mean difference.
double paired_ttest_onesided(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
    std::optional<double> factual_rmse;
    std::optional<double> cf_error;
    std::optional<double> amse;
    std::optional<double> dpe;
    std::optional<double> hsic_observed;
    std::optional<double> hsic_augmented;
    std::map<std::string, std::vector<double>> per_seed;
    std::map<std::string, double> p_values;
    // Metrics that could not be computed, with the reason.
    std::map<std::string, std::string> unavailable;
};

nlohmann::json to_json(const MetricsReport& report);

} // namespace giks::metrics
