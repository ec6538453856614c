#include "doctest.h"

#include <cmath>

#include "pole/hash.hpp"
#include "pole/nn.hpp"
#include "pole/rng.hpp"

using namespace pole;
using namespace pole::nn;

namespace {

std::vector<std::vector<double>> random_batch(Rng& rng, std::size_t n, std::size_t dim) {
    std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
    for (auto& row : xs)
        for (auto& v : row) v = rng.real() * 2.0 - 1.0;
    return xs;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
    std::vector<int> ys(n);
    for (auto& y : ys) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    return ys;
}

// independent oracle: central finite differences of the batch loss
double numeric_grad(Params params, double* slot, const std::vector<std::vector<double>>& xs,
                    const std::vector<int>& ys) {
    const double eps = 1e-4;
    double orig = *slot;
    *slot = orig + eps;
    double up = batch_loss(params, xs, ys);
    *slot = orig - eps;
    double down = batch_loss(params, xs, ys);
    *slot = orig;
    return (up - down) / (2.0 * eps);
}

}  // namespace

TEST_CASE("init_model shapes, determinism, and the zero-parameter edge") {
    ModelSpec spec;
    spec.layer_sizes = {4, 8, 3};
    Params p = init_model(spec, 7);
    REQUIRE(p.layers() == 2);
    CHECK(p.w[0].size() == 8 * 4);
    CHECK(p.w[1].size() == 3 * 8);
    CHECK(p.b[0].size() == 8);
    CHECK(p.b[1].size() == 3);
    for (double v : p.b[0]) CHECK(v == 0.0);

    Params p2 = init_model(spec, 7);
    CHECK(p.w == p2.w);
    Params p3 = init_model(spec, 8);
    CHECK(p.w != p3.w);

    double bound = std::sqrt(6.0 / (4 + 8));
    for (double v : p.w[0]) CHECK(std::abs(v) <= bound);

    // zero parameters give uniform class probabilities
    Params z = zero_model(spec);
    std::vector<double> x{0.2, -0.4, 1.0, 0.5};
    auto probs = forward_probs(z, x);
    for (double v : probs) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax probabilities sum to one") {
    ModelSpec spec;
    spec.layer_sizes = {6, 12, 5};
    Params p = init_model(spec, 21);
    Rng rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        auto xs = random_batch(rng, 1, 6);
        auto probs = forward_probs(p, xs[0]);
        double sum = 0.0;
        for (double v : probs) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        ModelSpec spec;
        spec.layer_sizes = {3 + static_cast<int>(rng.below(3)), 4 + static_cast<int>(rng.below(5)),
                            2 + static_cast<int>(rng.below(3))};
        Params p = init_model(spec, derive_seed(32, "init", static_cast<std::uint64_t>(trial)));
        auto xs = random_batch(rng, 5, static_cast<std::size_t>(spec.layer_sizes.front()));
        auto ys = random_labels(rng, 5, spec.layer_sizes.back());
        auto [loss, grads] = loss_and_gradients(p, xs, ys);
        CHECK(std::isfinite(loss));

        double max_rel = 0.0;
        for (std::size_t l = 0; l < p.layers(); ++l) {
            for (std::size_t i = 0; i < p.w[l].size(); i += 3) {
                double num = numeric_grad(p, &p.w[l][i], xs, ys);
                double rel = std::abs(grads.w[l][i] - num) / std::max(1.0, std::abs(num));
                max_rel = std::max(max_rel, rel);
            }
            for (std::size_t i = 0; i < p.b[l].size(); ++i) {
                double num = numeric_grad(p, &p.b[l][i], xs, ys);
                double rel = std::abs(grads.b[l][i] - num) / std::max(1.0, std::abs(num));
                max_rel = std::max(max_rel, rel);
            }
        }
        CHECK(max_rel < 1e-3);
    }
}

TEST_CASE("train_step contracts") {
    ModelSpec spec;
    spec.layer_sizes = {4, 6, 3};
    Params p = init_model(spec, 77);
    Rng rng(78);
    auto xs = random_batch(rng, 8, 4);
    auto ys = random_labels(rng, 8, 3);

    SUBCASE("lr = 0 leaves parameters unchanged") {
        Params before = p;
        train_step(p, xs, ys, 0.0);
        CHECK(p.w == before.w);
        CHECK(p.b == before.b);
    }

    SUBCASE("repeated steps on one sample drive the loss down") {
        std::vector<std::vector<double>> one{xs[0]};
        std::vector<int> y{ys[0]};
        double prev = batch_loss(p, one, y);
        int improved = 0;
        for (int step = 0; step < 50; ++step) {
            train_step(p, one, y, 0.5);
            double cur = batch_loss(p, one, y);
            if (cur <= prev + 1e-12) ++improved;
            prev = cur;
        }
        CHECK(improved >= 45);
    }

    SUBCASE("deterministic trajectory under a fixed seed and data order") {
        Params a = init_model(spec, 5);
        Params b = init_model(spec, 5);
        for (int step = 0; step < 20; ++step) {
            train_step(a, xs, ys, 0.1);
            train_step(b, xs, ys, 0.1);
        }
        CHECK(a.w == b.w);
        CHECK(a.b == b.b);
    }

    SUBCASE("divergence raises before the update") {
        Params bad = p;
        for (auto& v : bad.w[0]) v = 1e308;
        for (auto& v : bad.w[1]) v = 1e308;
        CHECK_THROWS_AS(train_step(bad, xs, ys, 0.1), NumericalDivergence);
    }
}

TEST_CASE("evaluate: self-consistency and the uniform predictor") {
    ModelSpec spec;
    spec.layer_sizes = {4, 8, 3};
    Params p = init_model(spec, 91);
    Rng rng(92);
    auto xs = random_batch(rng, 300, 4);

    // labels replaced by the model's own predictions give accuracy 1
    std::vector<int> self(300);
    for (std::size_t i = 0; i < xs.size(); ++i) self[i] = predict(p, xs[i]);
    CHECK(evaluate(p, xs, self) == 1.0);

    // zero parameters predict class 0 everywhere (lowest-index tie-break),
    // so balanced labels score about 1/C
    Params z = zero_model(spec);
    std::vector<int> balanced(300);
    for (std::size_t i = 0; i < balanced.size(); ++i) balanced[i] = static_cast<int>(i % 3);
    double acc = evaluate(z, xs, balanced);
    CHECK(acc > 1.0 / 3.0 - 0.05);
    CHECK(acc < 1.0 / 3.0 + 0.05);
    for (const auto& x : xs) CHECK(predict(z, x) == 0);
}

TEST_CASE("params serialization round-trips bit-exactly") {
    ModelSpec spec;
    spec.layer_sizes = {5, 7, 4};
    spec.required_accuracy = 0.9;
    spec.time_limit = 12.5;
    spec.lr = 0.05;
    spec.batch_size = 8;
    Params p = init_model(spec, 55);

    ByteWriter w;
    write_model_spec(w, spec);
    write_params(w, p);
    ByteReader r(w.bytes());
    ModelSpec spec2 = parse_model_spec(r);
    Params p2 = parse_params(r);
    CHECK(r.done());
    CHECK(spec2.layer_sizes == spec.layer_sizes);
    CHECK(spec2.required_accuracy == spec.required_accuracy);
    CHECK(spec2.time_limit == spec.time_limit);
    CHECK(spec2.lr == spec.lr);
    CHECK(spec2.batch_size == spec.batch_size);
    CHECK(p2.sizes == p.sizes);
    CHECK(p2.w == p.w);
    CHECK(p2.b == p.b);
}
