#include <doctest.h>

#include "giks/diffnet/optimizer.hpp"
#include "giks/diffnet/tape.hpp"
#include "giks/diffnet/tensor.hpp"
#include "giks/errors.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

using namespace giks::diffnet;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Tensor2 out(r, c);
    for (double& v : out.values()) v = dist(rng);
    return out;
}

// Central differences of `loss` with respect to every entry of every block.
std::vector<std::vector<double>> numeric_grads(std::vector<ParamBlock*> blocks,
                                               const std::function<double()>& loss,
                                               double h = 1e-5) {
    std::vector<std::vector<double>> out;
    for (ParamBlock* b : blocks) {
        std::vector<double> g(b->value.size());
        auto v = b->value.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + h;
            const double up = loss();
            v[i] = saved - h;
            const double down = loss();
            v[i] = saved;
            g[i] = (up - down) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
    return std::sqrt(diff) / denom;
}

} // namespace

TEST_CASE("tensor construction checks data length") {
    CHECK_THROWS_AS(Tensor2(2, 2, std::vector<double>{1, 2, 3}), giks::DimensionError);
    const Tensor2 t = Tensor2::from_rows({{1, 2}, {3, 4}});
    CHECK(t(1, 0) == 3.0);
    CHECK(t.all_finite());
}

TEST_CASE("matmul variants agree with hand products") {
    const Tensor2 a = Tensor2::from_rows({{1, 2}, {3, 4}});
    const Tensor2 b = Tensor2::from_rows({{5, 6}, {7, 8}});
    CHECK(matmul(a, b) == Tensor2::from_rows({{19, 22}, {43, 50}}));
    CHECK(matmul_tn(a, b) == Tensor2::from_rows({{26, 30}, {38, 44}}));
    CHECK(matmul_nt(a, b) == Tensor2::from_rows({{17, 23}, {39, 53}}));
    CHECK_THROWS_AS(matmul(a, Tensor2(3, 1)), giks::DimensionError);
}

TEST_CASE("affine forward examples") {
    Tape tape;
    ParamBlock w("w", Tensor2::from_rows({{1, 0}, {0, 1}}));
    ParamBlock b("b", Tensor2::from_rows({{0, 0}}));
    auto out = tape.affine(tape.constant(Tensor2::from_rows({{1, 2}})), tape.param(w), tape.param(b));
    CHECK(tape.value(out) == Tensor2::from_rows({{1, 2}}));

    ParamBlock w0("w0", Tensor2(2, 2));
    ParamBlock b0("b0", Tensor2::from_rows({{3, 4}}));
    out = tape.affine(tape.constant(Tensor2::from_rows({{1, 2}})), tape.param(w0), tape.param(b0));
    CHECK(tape.value(out) == Tensor2::from_rows({{3, 4}}));

    ParamBlock w2("w2", Tensor2::from_rows({{2, 3}, {4, 5}}));
    ParamBlock b2("b2", Tensor2::from_rows({{1, 1}}));
    out = tape.affine(tape.constant(Tensor2::from_rows({{1, 0}, {0, 1}})), tape.param(w2),
                      tape.param(b2));
    CHECK(tape.value(out) == Tensor2::from_rows({{3, 4}, {5, 6}}));

    CHECK_THROWS_AS(tape.affine(tape.constant(Tensor2(1, 3)), tape.param(w2), tape.param(b2)),
                    giks::DimensionError);
    ParamBlock bad_bias("bb", Tensor2(1, 3));
    CHECK_THROWS_AS(tape.affine(tape.constant(Tensor2(1, 2)), tape.param(w2), tape.param(bad_bias)),
                    giks::DimensionError);
}

TEST_CASE("backward trivial cases") {
    ParamBlock w("w", Tensor2(1, 1, 3.0));
    {
        Tape tape;
        tape.backward(tape.sum(tape.square(tape.param(w))));
        CHECK(w.grad(0, 0) == doctest::Approx(6.0));
    }
    w.zero_grad();
    w.value(0, 0) = -1.0;
    {
        Tape tape;
        tape.backward(tape.sum(tape.relu(tape.param(w))));
        CHECK(w.grad(0, 0) == 0.0);
    }
}

TEST_CASE("backward requires a scalar") {
    ParamBlock w("w", Tensor2(2, 1, 1.0));
    Tape tape;
    const auto node = tape.param(w);
    CHECK_THROWS_AS(tape.backward(node), giks::ContractError);
}

TEST_CASE("gradients accumulate until zeroed") {
    ParamBlock w("w", Tensor2(1, 1, 2.0));
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        tape.backward(tape.sum(tape.square(tape.param(w))));
    }
    CHECK(w.grad(0, 0) == doctest::Approx(8.0));
    std::vector<ParamBlock*> blocks{&w};
    zero_grads(blocks);
    CHECK(w.grad(0, 0) == 0.0);
}

TEST_CASE("random three-layer networks match finite differences") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t n = 4;
        const std::size_t d = 3;
        const std::size_t h1 = 5;
        const std::size_t h2 = 4;
        const Tensor2 x = random_tensor(n, d, rng);
        const Tensor2 y = random_tensor(n, 1, rng);
        const Tensor2 mask = random_tensor(n, 1, rng);
        ParamBlock w1("w1", random_tensor(d, h1, rng));
        ParamBlock b1("b1", random_tensor(1, h1, rng));
        ParamBlock w2("w2", random_tensor(h1, h2, rng));
        ParamBlock b2("b2", random_tensor(1, h2, rng));
        ParamBlock w3("w3", random_tensor(h2, 1, rng));
        ParamBlock b3("b3", random_tensor(1, 1, rng));
        std::vector<ParamBlock*> blocks{&w1, &b1, &w2, &b2, &w3, &b3};

        auto build = [&](Tape& tape) {
            auto h = tape.relu(tape.affine(tape.constant(x), tape.param(w1), tape.param(b1)));
            h = tape.relu(tape.affine(h, tape.param(w2), tape.param(b2)));
            const auto out = tape.affine(h, tape.param(w3), tape.param(b3));
            const auto resid = tape.sub(out, tape.constant(y));
            const auto weighted = tape.mul(tape.square(resid), tape.constant(mask));
            return tape.add(tape.mean(weighted), tape.scale(tape.sum(out), 0.3));
        };
        auto loss = [&] {
            Tape tape;
            return tape.scalar(build(tape));
        };

        zero_grads(blocks);
        Tape tape;
        tape.backward(build(tape));
        const auto numeric = numeric_grads(blocks, loss);
        std::vector<double> analytic_all;
        std::vector<double> numeric_all;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto g = blocks[b]->grad.values();
            analytic_all.insert(analytic_all.end(), g.begin(), g.end());
            numeric_all.insert(numeric_all.end(), numeric[b].begin(), numeric[b].end());
        }
        INFO("seed " << seed);
        CHECK(relative_error(analytic_all, numeric_all) <= 1e-4);
    }
}

TEST_CASE("spline contraction gradient matches finite differences") {
    std::mt19937_64 rng(7);
    const std::size_t n = 3;
    const std::size_t in = 4;
    const std::size_t dim = 5;
    const std::size_t out = 2;
    ParamBlock h("h", random_tensor(n, in, rng));
    ParamBlock bank("bank", random_tensor((in + 1) * dim, out, rng));
    const Tensor2 basis = random_tensor(n, dim, rng);
    std::vector<ParamBlock*> blocks{&h, &bank};
    auto build = [&](Tape& tape) {
        return tape.sum(tape.square(tape.spline_contract(tape.param(h), tape.param(bank), basis)));
    };
    Tape tape;
    tape.backward(build(tape));
    const auto numeric = numeric_grads(blocks, [&] {
        Tape t;
        return t.scalar(build(t));
    });
    CHECK(relative_error(h.grad.values(), numeric[0]) <= 1e-6);
    CHECK(relative_error(bank.grad.values(), numeric[1]) <= 1e-6);
}

TEST_CASE("softmax cross-entropy value and gradient") {
    ParamBlock logits("logits", Tensor2::from_rows({{0.0, 0.0}, {1.0, -1.0}}));
    Tape tape;
    const auto loss = tape.softmax_cross_entropy(tape.param(logits), {0, 1});
    const double expected =
        0.5 * (std::log(2.0) + (-(-1.0) + std::log(std::exp(1.0) + std::exp(-1.0))));
    CHECK(tape.scalar(loss) == doctest::Approx(expected).epsilon(1e-14));
    tape.backward(loss);
    const auto numeric = numeric_grads({&logits}, [&] {
        Tape t;
        return t.scalar(t.softmax_cross_entropy(t.param(logits), {0, 1}));
    });
    CHECK(relative_error(logits.grad.values(), numeric[0]) <= 1e-8);
    CHECK_THROWS_AS(tape.softmax_cross_entropy(tape.param(logits), {0, 2}), giks::DomainError);
}

TEST_CASE("adamw first step examples") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.0;
    ParamBlock w("w", Tensor2(1, 1, 1.0));
    w.grad(0, 0) = 2.0;
    std::vector<ParamBlock*> blocks{&w};
    adamw_step(blocks, cfg);
    CHECK(w.value(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(w.step_count == 1);

    ParamBlock z("z", Tensor2(2, 2, 0.7));
    std::vector<ParamBlock*> zb{&z};
    adamw_step(zb, cfg);
    CHECK(z.value == Tensor2(2, 2, 0.7));

    cfg.weight_decay = 0.01;
    ParamBlock d("d", Tensor2(1, 1, 5.0));
    std::vector<ParamBlock*> db{&d};
    adamw_step(db, cfg);
    CHECK(d.value(0, 0) == doctest::Approx(5.0 * (1.0 - 0.001)).epsilon(1e-15));
}

TEST_CASE("adamw matches a hand-unrolled three-step trajectory") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.1;
    const std::vector<double> grads{0.3, -1.2, 0.5};
    ParamBlock w("w", Tensor2(1, 1, 2.0));
    std::vector<ParamBlock*> blocks{&w};
    double value = 2.0;
    double m = 0.0;
    double v = 0.0;
    for (std::size_t s = 0; s < grads.size(); ++s) {
        w.grad(0, 0) = grads[s];
        adamw_step(blocks, cfg);
        m = 0.9 * m + 0.1 * grads[s];
        v = 0.999 * v + 0.001 * grads[s] * grads[s];
        const double mh = m / (1.0 - std::pow(0.9, s + 1.0));
        const double vh = v / (1.0 - std::pow(0.999, s + 1.0));
        value = value * (1.0 - 0.05 * 0.1) - 0.05 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(w.value(0, 0) == doctest::Approx(value).epsilon(1e-14));
    }
    CHECK(w.moment2(0, 0) >= 0.0);
}

TEST_CASE("adamw rejects non-finite gradients without touching any block") {
    OptimizerConfig cfg;
    ParamBlock a("encoder.0.weight", Tensor2(1, 2, 1.0));
    ParamBlock b("head.1.bank", Tensor2(1, 1, 1.0));
    a.grad(0, 0) = 1.0;
    b.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    std::vector<ParamBlock*> blocks{&a, &b};
    try {
        adamw_step(blocks, cfg);
        FAIL("expected TrainingError");
    } catch (const giks::TrainingError& e) {
        CHECK(e.block() == "head.1.bank");
    }
    CHECK(a.value == Tensor2(1, 2, 1.0));
    CHECK(a.step_count == 0);
}

TEST_CASE("adamw rejects inconsistent step counts") {
    ParamBlock a("a", Tensor2(1, 1, 1.0));
    ParamBlock b("b", Tensor2(1, 1, 1.0));
    b.step_count = 3;
    std::vector<ParamBlock*> blocks{&a, &b};
    CHECK_THROWS_AS(adamw_step(blocks, OptimizerConfig{}), giks::ContractError);
}

TEST_CASE("optimizer trajectories are deterministic") {
    auto run = [] {
        std::mt19937_64 rng(11);
        ParamBlock w("w", random_tensor(3, 2, rng));
        ParamBlock b("b", random_tensor(1, 2, rng));
        const Tensor2 x = random_tensor(8, 3, rng);
        std::vector<ParamBlock*> blocks{&w, &b};
        for (int step = 0; step < 20; ++step) {
            zero_grads(blocks);
            Tape tape;
            tape.backward(tape.mean(tape.square(tape.affine(tape.constant(x), tape.param(w), tape.param(b)))));
            adamw_step(blocks, OptimizerConfig{});
        }
        return w.value;
    };
    CHECK(run() == run());
}
