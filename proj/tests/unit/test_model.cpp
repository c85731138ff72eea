#include <doctest.h>

#include "giks/errors.hpp"
#include "giks/model/checkpoint.hpp"
#include "giks/model/spline.hpp"
#include "giks/model/vcnet.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

using namespace giks::model;
using giks::diffnet::Tape;
using giks::diffnet::Tensor2;

namespace {

Tensor2 random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor2 x(n, d);
    for (double& v : x.values()) v = dist(rng);
    return x;
}

std::vector<double> random_treatments(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> t(n);
    for (double& v : t) v = dist(rng);
    return t;
}

ModelConfig small_config(std::size_t d, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.encoder.input_dim = d;
    cfg.encoder.hidden_dims = {6};
    cfg.encoder.embed_dim = 5;
    cfg.head_hidden = {4};
    cfg.seed = seed;
    return cfg;
}

void zero_all(ModelState& m) {
    for (auto* p : m.params()) p->value.fill(0.0);
}

} // namespace

TEST_CASE("spline_eval examples") {
    const SplineBasis basis;
    CHECK(basis.dim() == 5);
    CHECK(spline_eval(basis, 0.0) == std::vector<double>{1, 0, 0, 0, 0});
    const auto mid = spline_eval(basis, 0.5);
    CHECK(mid[0] == 1.0);
    CHECK(mid[1] == 0.5);
    CHECK(mid[2] == 0.25);
    CHECK(mid[3] == doctest::Approx(1.0 / 36.0).epsilon(1e-15));
    CHECK(mid[4] == 0.0);
    const auto one = spline_eval(basis, 1.0);
    CHECK(one[2] == 1.0);
    CHECK(one[3] == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    CHECK(one[4] == doctest::Approx(1.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("spline_deriv examples and finite differences") {
    const SplineBasis basis;
    CHECK(spline_deriv(basis, 0.0) == std::vector<double>{0, 1, 0, 0, 0});
    const auto mid = spline_deriv(basis, 0.5);
    CHECK(mid[2] == 1.0);
    CHECK(mid[3] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(mid[4] == 0.0);
    const double h = 1e-5;
    for (int i = 1; i < 100; ++i) {
        const double t = i / 100.0;
        const auto up = spline_eval(basis, t + h);
        const auto down = spline_eval(basis, t - h);
        const auto d = spline_deriv(basis, t);
        for (std::size_t k = 0; k < d.size(); ++k)
            CHECK(std::abs((up[k] - down[k]) / (2 * h) - d[k]) <= 1e-6);
    }
}

TEST_CASE("spline domain and validation errors") {
    const SplineBasis basis;
    CHECK_THROWS_AS(spline_eval(basis, -0.01), giks::DomainError);
    CHECK_THROWS_AS(spline_deriv(basis, 1.01), giks::DomainError);
    SplineBasis bad;
    bad.knots = {0.6, 0.4};
    CHECK_THROWS_AS(bad.validate(), giks::ConfigError);
    bad.knots = {0.0};
    CHECK_THROWS_AS(bad.validate(), giks::ConfigError);
}

TEST_CASE("parameter count and deterministic initialization") {
    ModelConfig cfg;
    cfg.encoder.input_dim = 6;
    const ModelState m(cfg);
    const std::size_t encoder = (6 * 50 + 50) + (50 * 50 + 50) + (50 * 50 + 50);
    const std::size_t head = (50 + 1) * 50 * 5 + (50 + 1) * 1 * 5;
    CHECK(m.parameter_count() == encoder + head);

    const ModelState again(cfg);
    const auto a = m.params();
    const auto b = again.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);

    cfg.seed = 1;
    const ModelState other(cfg);
    CHECK(other.params()[0]->value != m.params()[0]->value);
}

TEST_CASE("initialization stays within the fan-in bound") {
    const ModelState m(small_config(3, 2));
    const auto& blocks = m.encoder().blocks();
    const double bound = 1.0 / std::sqrt(3.0);
    for (double v : blocks[0].value.values()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("encode examples") {
    ModelState m(small_config(3, 0));
    zero_all(m);
    const Tensor2 x = random_inputs(4, 3, 1);
    const Tensor2 e = m.encode(x);
    CHECK(e.rows() == 4);
    CHECK(e.cols() == 5);
    for (double v : e.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(m.encode(Tensor2(2, 4)), giks::DimensionError);

    ModelConfig id;
    id.encoder.input_dim = 3;
    id.encoder.hidden_dims = {};
    id.encoder.embed_dim = 3;
    ModelState ident(id);
    auto& blocks = ident.encoder().blocks();
    blocks[0].value = Tensor2::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    blocks[1].value.fill(0.0);
    const Tensor2 nonneg = Tensor2::from_rows({{0.5, 2.0, 0.0}, {1.0, 0.25, 3.0}});
    CHECK(ident.encode(nonneg) == nonneg);

    const ModelState random(small_config(3, 9));
    CHECK(random.encode(x).all_finite());
}

TEST_CASE("predict examples") {
    ModelState m(small_config(3, 0));
    const Tensor2 x = random_inputs(5, 3, 2);
    const auto t = random_treatments(5, 3);

    auto* head = dynamic_cast<VcHead*>(&m.head());
    REQUIRE(head != nullptr);
    CHECK(head->layer_shapes().back().second == 1);

    // Continuity in t.
    const auto base = m.predict(x, t);
    std::vector<double> shifted = t;
    for (double& v : shifted) v = std::min(v + 1e-9, 1.0);
    const auto near = m.predict(x, shifted);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(base[i] - near[i]) <= 1e-6);

    CHECK_THROWS_AS(m.predict(x, std::vector<double>(5, 1.5)), giks::DomainError);
    CHECK_THROWS_AS(m.predict(x, std::vector<double>(4, 0.5)), giks::DimensionError);

    for (auto& bank : head->banks()) bank.value.fill(0.0);
    for (double v : m.predict(x, t)) CHECK(v == 0.0);
    for (double v : m.predict_dt(x, t)) CHECK(v == 0.0);
}

TEST_CASE("single linear head layer reproduces slope * t * sum of features") {
    ModelConfig cfg = small_config(3, 4);
    cfg.head_hidden = {};
    ModelState m(cfg);
    auto& bank = dynamic_cast<VcHead&>(m.head()).banks()[0].value;
    bank.fill(0.0);
    const double slope = 1.7;
    const std::size_t dim = cfg.basis.dim();
    for (std::size_t a = 0; a < cfg.encoder.embed_dim; ++a) bank(a * dim + 1, 0) = slope;

    const Tensor2 x = random_inputs(6, 3, 5);
    const auto t = random_treatments(6, 6);
    const Tensor2 e = m.encode(x);
    const auto pred = m.predict(x, t);
    const auto dt = m.predict_dt(x, t);
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (double v : e.row_span(i)) s += v;
        CHECK(pred[i] == doctest::Approx(slope * t[i] * s).epsilon(1e-12));
        CHECK(dt[i] == doctest::Approx(slope * s).epsilon(1e-12));
    }
}

TEST_CASE("head built as c*t has derivative c everywhere") {
    ModelState m(small_config(2, 8));
    auto& head = dynamic_cast<VcHead&>(m.head());
    const double c = -0.8;
    const std::size_t dim = head.basis().dim();
    // Layer 0: unit 0 outputs the constant 1 through its bias; the rest vanish.
    auto& b0 = head.banks()[0].value;
    b0.fill(0.0);
    const std::size_t in0 = head.layer_shapes()[0].first;
    b0(in0 * dim + 0, 0) = 1.0;
    // Layer 1: weight on unit 0 is c*t.
    auto& b1 = head.banks()[1].value;
    b1.fill(0.0);
    b1(0 * dim + 1, 0) = c;

    const Tensor2 x = random_inputs(7, 2, 9);
    const auto t = random_treatments(7, 10);
    const auto pred = m.predict(x, t);
    const auto dt = m.predict_dt(x, t);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(pred[i] == doctest::Approx(c * t[i]).epsilon(1e-14));
        CHECK(dt[i] == doctest::Approx(c).epsilon(1e-14));
    }
}

TEST_CASE("predict_dt matches finite differences on random models") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ModelState m(small_config(3, seed));
        const Tensor2 x = random_inputs(101, 3, seed + 100);
        std::vector<double> grid(101);
        for (std::size_t g = 0; g < grid.size(); ++g) grid[g] = 0.0001 + 0.9998 * g / 100.0;
        const double h = 1e-4;
        std::vector<double> up = grid;
        std::vector<double> down = grid;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            up[g] += h;
            down[g] -= h;
        }
        const auto pu = m.predict(x, up);
        const auto pd = m.predict(x, down);
        const auto dt = m.predict_dt(x, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(std::isfinite(dt[i]));
            CHECK(std::abs((pu[i] - pd[i]) / (2 * h) - dt[i]) <= 1e-4);
        }
    }
}

TEST_CASE("predict_grid agrees with pointwise predict") {
    const ModelState m(small_config(4, 3));
    const Tensor2 x = random_inputs(5, 4, 12);
    const std::vector<double> grid{0.0, 0.1, 0.33, 0.5, 0.8, 1.0};
    const Tensor2 g = m.predict_grid(x, grid);
    REQUIRE(g.rows() == 5);
    REQUIRE(g.cols() == grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const auto p = m.predict(x, std::vector<double>(5, grid[j]));
        for (std::size_t i = 0; i < 5; ++i) CHECK(g(i, j) == doctest::Approx(p[i]).epsilon(1e-12));
    }
}

TEST_CASE("recorded forward pass matches predict and its gradients match finite differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ModelState m(small_config(3, seed));
        const Tensor2 x = random_inputs(4, 3, seed + 50);
        const auto t = random_treatments(4, seed + 60);
        const Tensor2 y = random_inputs(4, 1, seed + 70);

        Tape tape;
        const auto out = m.record_predict(tape, x, t);
        const auto pred = m.predict(x, t);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(tape.value(out)(i, 0) == doctest::Approx(pred[i]).epsilon(1e-14));

        auto params = m.params();
        giks::diffnet::zero_grads(params);
        tape.backward(tape.mean(tape.square(tape.sub(out, tape.constant(y)))));

        auto loss = [&] {
            const auto p = m.predict(x, t);
            double acc = 0.0;
            for (std::size_t i = 0; i < 4; ++i) acc += (p[i] - y(i, 0)) * (p[i] - y(i, 0));
            return acc / 4.0;
        };
        double diff = 0.0;
        double norm = 0.0;
        for (auto* p : params) {
            auto v = p->value.values();
            const auto g = p->grad.values();
            for (std::size_t k = 0; k < v.size(); ++k) {
                const double saved = v[k];
                v[k] = saved + 1e-5;
                const double lu = loss();
                v[k] = saved - 1e-5;
                const double ld = loss();
                v[k] = saved;
                const double fd = (lu - ld) / 2e-5;
                diff += (fd - g[k]) * (fd - g[k]);
                norm += g[k] * g[k];
            }
        }
        CHECK(std::sqrt(diff) <= 1e-4 * std::sqrt(norm));
    }
}

TEST_CASE("copies are deep") {
    ModelState a(small_config(2, 1));
    ModelState b = a;
    dynamic_cast<VcHead&>(b.head()).banks()[0].value.fill(0.0);
    CHECK(dynamic_cast<VcHead&>(a.head()).banks()[0].value !=
          dynamic_cast<VcHead&>(b.head()).banks()[0].value);
}

TEST_CASE("estimator applies the outcome scale") {
    ModelState m(small_config(2, 1));
    m.outcome_scale = {3.0, 2.0};
    const Estimator est(m);
    const Tensor2 x = random_inputs(3, 2, 4);
    const auto t = random_treatments(3, 5);
    const auto raw = m.predict(x, t);
    const auto scaled = est.predict(x, t);
    for (std::size_t i = 0; i < 3; ++i) CHECK(scaled[i] == doctest::Approx(3.0 + 2.0 * raw[i]));
    const std::vector<double> grid{0.2, 0.7};
    const Tensor2 g = est.predict_grid(x, grid);
    const auto p = est.predict(x, std::vector<double>(3, 0.7));
    for (std::size_t i = 0; i < 3; ++i) CHECK(g(i, 1) == doctest::Approx(p[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit exact") {
    ModelState m(small_config(3, 21));
    m.outcome_scale = {0.1 + 1e-17, 3.0 / 7.0};
    const auto path = std::filesystem::temp_directory_path() / "giks_ckpt_roundtrip.json";
    save_checkpoint(path, m, nlohmann::json{{"note", "x"}});
    const Checkpoint loaded = load_checkpoint(path);
    CHECK(loaded.extra["note"] == "x");
    CHECK(loaded.model.config() == m.config());
    CHECK(loaded.model.outcome_scale.mean == m.outcome_scale.mean);
    CHECK(loaded.model.outcome_scale.scale == m.outcome_scale.scale);
    const auto a = m.params();
    const auto b = loaded.model.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->name == b[i]->name);
        CHECK(a[i]->value == b[i]->value);
    }
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints raise integrity errors") {
    const ModelState m(small_config(2, 3));
    nlohmann::json doc = model_to_json(m);

    auto bad_shape = doc;
    bad_shape["params"][0]["rows"] = 99;
    CHECK_THROWS_AS(model_from_json(bad_shape), giks::IntegrityError);

    auto bad_name = doc;
    bad_name["params"][1]["name"] = "encoder.9.bias";
    CHECK_THROWS_AS(model_from_json(bad_name), giks::IntegrityError);

    auto missing = doc;
    missing["params"].erase(missing["params"].size() - 1);
    CHECK_THROWS_AS(model_from_json(missing), giks::IntegrityError);

    auto non_numeric = doc;
    non_numeric["params"][0]["values"][0] = nullptr;
    CHECK_THROWS_AS(model_from_json(non_numeric), giks::IntegrityError);

    auto wrong_format = doc;
    wrong_format["format"] = "something-else";
    CHECK_THROWS_AS(model_from_json(wrong_format), giks::IntegrityError);

    const auto path = std::filesystem::temp_directory_path() / "giks_ckpt_truncated.json";
    {
        std::ofstream out(path);
        out << doc.dump().substr(0, 100);
    }
    CHECK_THROWS_AS(load_checkpoint(path), giks::IntegrityError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), giks::IntegrityError);
}
