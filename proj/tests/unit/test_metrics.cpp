#include <doctest.h>

#include "giks/errors.hpp"
#include "giks/metrics/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace giks::metrics;
using giks::FunctionDoseResponse;
using giks::data::Dataset;
using giks::data::ResponseOracle;
using giks::diffnet::Tensor2;

namespace {

Dataset fixture(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Dataset d;
    d.x = Tensor2(n, 2);
    for (double& v : d.x.values()) v = unit(rng);
    for (std::size_t i = 0; i < n; ++i) {
        d.t.push_back(unit(rng));
        d.y.push_back(d.x(i, 0) + d.t.back());
    }
    return d;
}

double mu(std::span<const double> x, double t) { return std::sin(3.0 * t) * x[0] + x[1]; }

Tensor2 gaussian(std::size_t n, std::size_t p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor2 out(n, p);
    for (double& v : out.values()) v = normal(rng);
    return out;
}

Tensor2 permute_rows(const Tensor2& a, std::mt19937_64& rng) {
    std::vector<std::size_t> order(a.rows());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    return giks::diffnet::select_rows(a, order);
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

} // namespace

TEST_CASE("factual_rmse examples") {
    const Dataset d = fixture(20, 1);
    const FunctionDoseResponse perfect([](std::span<const double> x, double t) { return x[0] + t; });
    CHECK(factual_rmse(perfect, d) == 0.0);
    const FunctionDoseResponse offset(
        [](std::span<const double> x, double t) { return x[0] + t - 0.7; });
    CHECK(factual_rmse(offset, d) == doctest::Approx(0.7).epsilon(1e-12));

    Dataset three;
    three.x = Tensor2(3, 1);
    three.t = {0.1, 0.5, 0.9};
    three.y = {1.0, 2.0, 4.0};
    const FunctionDoseResponse zero([](std::span<const double>, double) { return 1.0; });
    // Errors 0, 1, 3: sqrt(10/3).
    CHECK(factual_rmse(zero, three) == doctest::Approx(std::sqrt(10.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("cf_error examples") {
    const Dataset d = fixture(30, 2);
    const ResponseOracle oracle(mu);
    const FunctionDoseResponse same(mu);
    CHECK(cf_error(same, d, &oracle) == 0.0);

    const FunctionDoseResponse shifted(
        [](std::span<const double> x, double t) { return mu(x, t) + t; });
    CHECK(std::abs(cf_error(shifted, d, &oracle) - std::sqrt(1.0 / 3.0)) <= 1e-3);
    CHECK(std::abs(cf_error(shifted, d, &oracle, 65) - cf_error(shifted, d, &oracle, 129)) < 1e-3);

    CHECK_THROWS_AS(cf_error(same, d, nullptr), giks::UnavailableMetricError);
    CHECK_THROWS_AS(midpoint_grid(1), giks::ConfigError);
}

TEST_CASE("cf_error is order invariant and shrinks toward the oracle") {
    const Dataset d = fixture(25, 3);
    const ResponseOracle oracle(mu);
    auto blend = [](double alpha) {
        return FunctionDoseResponse([alpha](std::span<const double> x, double t) {
            const double model = 0.3 * x[1] - t * t;
            return alpha * mu(x, t) + (1.0 - alpha) * model;
        });
    };
    const double e0 = cf_error(blend(0.0), d, &oracle);
    const double e5 = cf_error(blend(0.5), d, &oracle);
    const double e1 = cf_error(blend(1.0), d, &oracle);
    CHECK(e0 >= e5);
    CHECK(e5 >= e1);

    std::vector<std::size_t> reversed(d.size());
    std::iota(reversed.rbegin(), reversed.rend(), 0);
    const Dataset r = giks::data::take_rows(d, reversed);
    CHECK(cf_error(blend(0.0), r, &oracle) == doctest::Approx(e0).epsilon(1e-13));
}

TEST_CASE("amse examples") {
    const Dataset d = fixture(40, 4);
    const ResponseOracle oracle(mu);
    const FunctionDoseResponse same(mu);
    CHECK(amse(same, d, &oracle, d.t, 0) == 0.0);
    const FunctionDoseResponse off([](std::span<const double> x, double t) { return mu(x, t) - 0.3; });
    CHECK(amse(off, d, &oracle, d.t, 0) == doctest::Approx(0.09).epsilon(1e-12));

    // Uniform training treatments: amse approximates cf_error².
    std::vector<double> uniform(5000);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double& v : uniform) v = unit(rng);
    const FunctionDoseResponse shifted([](std::span<const double> x, double t) { return mu(x, t) + t; });
    const double cf = cf_error(shifted, d, &oracle);
    const double a = amse(shifted, d, &oracle, uniform, 3);
    CHECK(std::abs(a - cf * cf) <= 0.05 * cf * cf);
}

TEST_CASE("dpe examples") {
    Dataset d;
    d.x = Tensor2(1, 1);
    d.t = {0.5};
    d.y = {0.0};
    const ResponseOracle oracle([](std::span<const double>, double t) { return -(t - 0.6) * (t - 0.6); });
    const FunctionDoseResponse model([](std::span<const double>, double t) { return -(t - 0.4) * (t - 0.4); });
    CHECK(dpe(model, d, &oracle) == doctest::Approx(0.0016).epsilon(1e-12));

    const FunctionDoseResponse right_argmax_biased(
        [](std::span<const double>, double t) { return 5.0 - 3.0 * (t - 0.6) * (t - 0.6); });
    CHECK(dpe(right_argmax_biased, d, &oracle) == 0.0);

    const Dataset many = fixture(15, 5);
    const FunctionDoseResponse arbitrary([](std::span<const double> x, double t) { return std::cos(4 * t + x[0]); });
    const FunctionDoseResponse scaled([](std::span<const double> x, double t) { return 3.0 * std::cos(4 * t + x[0]); });
    const ResponseOracle truth(mu);
    CHECK(dpe(arbitrary, many, &truth) == dpe(scaled, many, &truth));
    CHECK(dpe(FunctionDoseResponse(mu), many, &truth) == 0.0);
}

TEST_CASE("hsic basic properties") {
    std::mt19937_64 rng(6);
    const Tensor2 a = gaussian(50, 2, rng);
    CHECK(hsic(a, Tensor2(50, 1, 3.0)) == doctest::Approx(0.0).epsilon(1e-15));
    const Tensor2 b = gaussian(50, 1, rng);
    CHECK(hsic(a, b) == doctest::Approx(hsic(b, a)).epsilon(1e-12));
    std::mt19937_64 perm(1);
    std::vector<std::size_t> order(50);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), perm);
    CHECK(hsic(giks::diffnet::select_rows(a, order), giks::diffnet::select_rows(b, order)) ==
          doctest::Approx(hsic(a, b)).epsilon(1e-12));
    CHECK(median_bandwidth(Tensor2(5, 2, 1.0)) == 1.0);
    CHECK_THROWS_AS(hsic(Tensor2(3, 1), Tensor2(3, 1)), giks::ContractError);
}

TEST_CASE("hsic permutation null and dependence at n=500") {
    std::mt19937_64 rng(7);
    const Tensor2 a = gaussian(500, 2, rng);
    const Tensor2 b = gaussian(500, 1, rng);
    std::vector<double> null_ab;
    std::vector<double> null_aa;
    for (int p = 0; p < 200; ++p) {
        const Tensor2 shuffled = permute_rows(b, rng);
        null_ab.push_back(hsic(a, shuffled));
        null_aa.push_back(hsic(a, permute_rows(a, rng)));
    }
    CHECK(hsic(a, b) < percentile(null_ab, 0.95));
    CHECK(hsic(a, a) > percentile(null_aa, 0.99));
}

TEST_CASE("incomplete beta and t tail against Boost") {
    for (double a : {0.5, 1.0, 2.5, 10.0}) {
        for (double b : {0.5, 1.0, 3.0, 7.5}) {
            for (double x : {0.01, 0.2, 0.5, 0.77, 0.99}) {
                CHECK(incomplete_beta(a, b, x) ==
                      doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-12));
            }
        }
    }
    for (double df : {1.0, 2.0, 4.0, 9.0, 30.0}) {
        const boost::math::students_t dist(df);
        for (double t : {-3.0, -0.5, 0.0, 0.7, 2.0, 14.0}) {
            CHECK(student_t_upper_tail(t, df) ==
                  doctest::Approx(boost::math::cdf(boost::math::complement(dist, t))).epsilon(1e-10));
        }
    }
}

TEST_CASE("paired one-sided t-test examples") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK(paired_ttest_onesided(a, a) == 0.5);
    const std::vector<double> b{0.0, 1.0, 2.0};
    CHECK(paired_ttest_onesided(a, b) == 0.0);
    CHECK(paired_ttest_onesided(b, a) == 1.0);

    const std::vector<double> diffs{1.2, 0.8, 1.1, 0.9, 1.0};
    const std::vector<double> zeros(5, 0.0);
    // mean 1, sample sd sqrt(0.025): t = 1/sqrt(0.005) ≈ 14.142 with df = 4.
    const double t = 1.0 / std::sqrt(0.025 / 5.0);
    CHECK(t == doctest::Approx(14.1421356).epsilon(1e-7));
    const double p = paired_ttest_onesided(diffs, zeros);
    const boost::math::students_t dist(4.0);
    CHECK(p == doctest::Approx(boost::math::cdf(boost::math::complement(dist, t))).epsilon(1e-10));
    CHECK(p < 1e-3);
    CHECK_THROWS_AS(paired_ttest_onesided(a, std::vector<double>{1.0}), giks::DimensionError);
}

TEST_CASE("metrics report json marks missing values") {
    MetricsReport r;
    r.factual_rmse = 0.5;
    r.unavailable["cf_error"] = "no oracle";
    const auto doc = to_json(r);
    CHECK(doc["factual_rmse"] == 0.5);
    CHECK(doc["cf_error"].is_null());
    CHECK(doc["unavailable"]["cf_error"] == "no oracle");
}
