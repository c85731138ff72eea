#include "giks/metrics/metrics.hpp"

#include "giks/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace giks::metrics {

using diffnet::Tensor2;

namespace {

const data::ResponseOracle& require_oracle(const data::ResponseOracle* oracle, const char* metric) {
    if (oracle == nullptr) {
        throw UnavailableMetricError(std::string(metric) + " needs a response oracle");
    }
    return *oracle;
}

void require_rows(const data::Dataset& test) {
    if (test.size() == 0) throw ContractError("metric needs a non-empty dataset");
}

std::vector<double> dose_grid() {
    std::vector<double> g(data::ResponseOracle::kDoseGrid + 1);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<double>(i) / static_cast<double>(data::ResponseOracle::kDoseGrid);
    return g;
}

std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t g = 1; g < row.size(); ++g)
        if (row[g] > row[best]) best = g;
    return best;
}

// Mean squared gap between two n×G surfaces.
double mean_squared_gap(const Tensor2& a, const Tensor2& b) {
    double acc = 0.0;
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
    return acc / static_cast<double>(av.size());
}

Tensor2 rbf_gram(const Tensor2& a, double bandwidth) {
    const std::size_t n = a.rows();
    Tensor2 k(n, n);
    const double denom = 2.0 * bandwidth * bandwidth;
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            const auto ri = a.row_span(i);
            const auto rj = a.row_span(j);
            for (std::size_t c = 0; c < ri.size(); ++c) d2 += (ri[c] - rj[c]) * (ri[c] - rj[c]);
            const double v = std::exp(-d2 / denom);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

// In-place double centering H·K·H.
void center(Tensor2& k) {
    const std::size_t n = k.rows();
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : k.row_span(i)) row_mean[i] += v;
        grand += row_mean[i];
        row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n) * static_cast<double>(n);
    // Symmetric, so column means equal row means.
    for (std::size_t i = 0; i < n; ++i) {
        auto row = k.row_span(i);
        for (std::size_t j = 0; j < n; ++j) row[j] += grand - row_mean[i] - row_mean[j];
    }
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) return h;
    }
    throw NumericalError("incomplete beta continued fraction did not converge");
}

} // namespace

double factual_rmse(const DoseResponse& model, const data::Dataset& test) {
    require_rows(test);
    const auto pred = model.predict(test.x, test.t);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (test.y[i] - pred[i]) * (test.y[i] - pred[i]);
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

std::vector<double> midpoint_grid(std::size_t grid_size) {
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    std::vector<double> g(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        g[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(grid_size);
    return g;
}

double cf_error(const DoseResponse& model, const data::Dataset& test,
                const data::ResponseOracle* oracle, std::size_t grid_size) {
    const auto& truth = require_oracle(oracle, "cf_error");
    require_rows(test);
    const auto grid = midpoint_grid(grid_size);
    return std::sqrt(mean_squared_gap(truth.predict_grid(test.x, grid), model.predict_grid(test.x, grid)));
}

double amse(const DoseResponse& model, const data::Dataset& test,
            const data::ResponseOracle* oracle, std::span<const double> train_treatments,
            std::uint64_t seed, std::size_t draws) {
    const auto& truth = require_oracle(oracle, "amse");
    require_rows(test);
    if (train_treatments.empty() || draws == 0) throw ContractError("amse needs treatments to draw");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, train_treatments.size() - 1);
    // Each instance gets its own draws, so Monte Carlo error averages out
    // across instances.
    const std::size_t n = test.size();
    Tensor2 x(n * draws, test.dim());
    std::vector<double> t(n * draws);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = test.x.row_span(i);
        for (std::size_t k = 0; k < draws; ++k) {
            const std::size_t r = i * draws + k;
            std::copy(src.begin(), src.end(), x.row_span(r).begin());
            t[r] = train_treatments[pick(rng)];
        }
    }
    const auto truth_values = truth.predict(x, t);
    const auto model_values = model.predict(x, t);
    double acc = 0.0;
    for (std::size_t r = 0; r < t.size(); ++r)
        acc += (truth_values[r] - model_values[r]) * (truth_values[r] - model_values[r]);
    return acc / static_cast<double>(t.size());
}

double model_best_dose(const DoseResponse& model, std::span<const double> x) {
    const Tensor2 row(1, x.size(), std::vector<double>(x.begin(), x.end()));
    const auto grid = dose_grid();
    const Tensor2 surface = model.predict_grid(row, grid);
    return grid[argmax_row(surface.row_span(0))];
}

double dpe(const DoseResponse& model, const data::Dataset& test,
           const data::ResponseOracle* oracle) {
    const auto& truth = require_oracle(oracle, "dpe");
    require_rows(test);
    const auto grid = dose_grid();
    const Tensor2 surface = model.predict_grid(test.x, grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto x = test.x.row_span(i);
        const double t_star = truth.best_dose(x);
        const double t_hat = grid[argmax_row(surface.row_span(i))];
        const double gap = truth(x, t_star) - truth(x, t_hat);
        acc += gap * gap;
    }
    return acc / static_cast<double>(test.size());
}

double median_bandwidth(const Tensor2& a) {
    const std::size_t n = a.rows();
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) d2 += (a(i, c) - a(j, c)) * (a(i, c) - a(j, c));
            dist.push_back(std::sqrt(d2));
        }
    }
    if (dist.empty()) return 1.0;
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    return median > 0.0 ? median : 1.0;
}

double hsic(const Tensor2& a, const Tensor2& b) {
    const std::size_t n = a.rows();
    if (b.rows() != n) throw DimensionError("hsic inputs need the same number of rows");
    if (n < 4) throw ContractError("hsic needs at least 4 rows");
    Tensor2 k = rbf_gram(a, median_bandwidth(a));
    Tensor2 l = rbf_gram(b, median_bandwidth(b));
    center(k);
    center(l);
    double acc = 0.0;
    const auto kv = k.values();
    const auto lv = l.values();
    for (std::size_t i = 0; i < kv.size(); ++i) acc += kv[i] * lv[i];
    const double denom = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    return std::max(0.0, acc / denom);
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double df) {
    if (!(df > 0.0)) throw DomainError("degrees of freedom must be > 0");
    if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
    const double x = df / (df + t * t);
    const double two_sided = incomplete_beta(df / 2.0, 0.5, x);
    return t > 0.0 ? 0.5 * two_sided : 1.0 - 0.5 * two_sided;
}

double paired_ttest_onesided(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("paired t-test needs equal lengths");
    if (a.size() < 2) throw ContractError("paired t-test needs at least 2 pairs");
    const auto n = static_cast<double>(a.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= n - 1.0;
    if (var < 1e-24) {
        if (mean > 0.0) return 0.0;
        if (mean < 0.0) return 1.0;
        return 0.5;
    }
    const double t = mean / std::sqrt(var / n);
    return student_t_upper_tail(t, n - 1.0);
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json doc = nlohmann::json::object();
    auto put = [&](const char* key, const std::optional<double>& v) {
        doc[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    put("factual_rmse", report.factual_rmse);
    put("cf_error", report.cf_error);
    put("amse", report.amse);
    put("dpe", report.dpe);
    put("hsic_observed", report.hsic_observed);
    put("hsic_augmented", report.hsic_augmented);
    doc["per_seed"] = report.per_seed;
    doc["p_values"] = report.p_values;
    doc["unavailable"] = report.unavailable;
    return doc;
}

} // namespace giks::metrics
