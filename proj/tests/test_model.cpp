#include <doctest.h>

#include <cmath>

#include "onglab/model.hpp"
#include "testutil.hpp"

using namespace onglab;

namespace {

Batch random_batch(std::size_t n, std::size_t d, std::size_t classes, Rng& rng) {
    Batch b;
    b.x = testutil::random_mat(n, d, rng);
    b.y.resize(n);
    for (auto& y : b.y) y = static_cast<std::uint8_t>(rng.index(classes));
    return b;
}

// Flat layout offsets: per layer, weights row-major then bias.
std::size_t layer_offset(const ModelParams& p, std::size_t layer) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
        off += p.layers[l].weight.size() + p.layers[l].bias.size();
    return off;
}

}  // namespace

TEST_CASE("init_kaiming: parameter count of the default architecture") {
    ModelParams p = init_kaiming({784, 100, 100, 10}, 11);
    CHECK(p.param_count() == 89610);
}

TEST_CASE("init_kaiming: deterministic per seed") {
    ModelParams a = init_kaiming({5, 4, 3}, 123);
    ModelParams b = init_kaiming({5, 4, 3}, 123);
    CHECK(flatten_params(a) == flatten_params(b));
    ModelParams c = init_kaiming({5, 4, 3}, 124);
    CHECK(flatten_params(a) != flatten_params(c));
}

TEST_CASE("init_kaiming: weight variance tracks 2/fan_in") {
    ModelParams p = init_kaiming({2, 50000}, 77);
    const Mat& w = p.layers[0].weight;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        sum += w.data()[i];
        sum2 += w.data()[i] * w.data()[i];
    }
    const double n = static_cast<double>(w.size());
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(1.0).epsilon(0.10));
    for (double b : p.layers[0].bias) CHECK(b == 0.0);
}

TEST_CASE("init_kaiming: rejects empty or zero dims") {
    CHECK_THROWS_AS(init_kaiming({}, 1), StructuralError);
    CHECK_THROWS_AS(init_kaiming({4}, 1), StructuralError);
    CHECK_THROWS_AS(init_kaiming({4, 0, 3}, 1), StructuralError);
}

TEST_CASE("forward: zero network predicts uniformly") {
    ModelParams p = init_kaiming({6, 10}, 1);
    for (auto& l : p.layers)
        for (std::size_t i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = 0.0;
    Rng rng(2);
    ForwardCache cache = forward(p, testutil::random_mat(4, 6, rng));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 10; ++c)
            CHECK(cache.probs(i, c) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("forward: softmax survives huge logits") {
    // zero weights, bias = (1000, 1000, 999) so the logits are exact
    ModelParams p = init_kaiming({1, 3}, 1);
    for (std::size_t i = 0; i < p.layers[0].weight.size(); ++i)
        p.layers[0].weight.data()[i] = 0.0;
    p.layers[0].bias = {1000.0, 1000.0, 999.0};
    Mat x(1, 1);
    ForwardCache cache = forward(p, x);
    // softmax(1, 1, 0): p0 = p1 = e/(2e+1), p2 = 1/(2e+1)
    const double e1 = std::exp(1.0);
    CHECK(cache.probs(0, 0) == doctest::Approx(e1 / (2 * e1 + 1)).epsilon(1e-12));
    CHECK(cache.probs(0, 1) == doctest::Approx(e1 / (2 * e1 + 1)).epsilon(1e-12));
    CHECK(cache.probs(0, 2) == doctest::Approx(1.0 / (2 * e1 + 1)).epsilon(1e-12));
}

TEST_CASE("forward: probability rows sum to one") {
    Rng rng(40);
    ModelParams p = init_kaiming({8, 6, 5}, 41);
    ForwardCache cache = forward(p, testutil::random_mat(16, 8, rng));
    for (std::size_t i = 0; i < 16; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 5; ++c) s += cache.probs(i, c);
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("forward: input width mismatch") {
    ModelParams p = init_kaiming({6, 4}, 1);
    CHECK_THROWS_AS(forward(p, Mat(2, 5)), StructuralError);
}

TEST_CASE("forward: empty batch") {
    ModelParams p = init_kaiming({6, 4}, 1);
    CHECK_THROWS_AS(forward(p, Mat(0, 6)), StructuralError);
}

TEST_CASE("loss_and_backward: zero net loss is ln(classes)") {
    ModelParams p = init_kaiming({6, 10}, 1);
    for (auto& l : p.layers)
        for (std::size_t i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = 0.0;
    Rng rng(3);
    Batch b = random_batch(8, 6, 10, rng);
    BackwardResult r = loss_and_backward(p, b);
    CHECK(r.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("loss_and_backward: gradient matches central finite differences") {
    Rng rng(17);
    ModelParams p = init_kaiming({6, 4, 3}, 18);
    Batch b = random_batch(5, 6, 3, rng);
    BackwardResult r = loss_and_backward(p, b);
    CHECK(r.loss >= 0.0);

    Vec fd = testutil::finite_difference_grad(
        p, [&](const ModelParams& q) { return loss_and_backward(q, b).loss; });
    REQUIRE(fd.size() == r.grad.size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(r.grad[i] - fd[i]) <= std::max(1e-6, 1e-4 * std::abs(fd[i])));
    }
}

TEST_CASE("loss_and_backward: duplicating the batch changes nothing") {
    Rng rng(19);
    ModelParams p = init_kaiming({5, 4, 3}, 20);
    Batch b = random_batch(6, 5, 3, rng);
    Batch doubled;
    doubled.x = Mat(12, 5);
    doubled.y.resize(12);
    for (std::size_t i = 0; i < 12; ++i) {
        const std::size_t src = i % 6;
        for (std::size_t j = 0; j < 5; ++j) doubled.x(i, j) = b.x(src, j);
        doubled.y[i] = b.y[src];
    }
    BackwardResult r1 = loss_and_backward(p, b);
    BackwardResult r2 = loss_and_backward(p, doubled);
    CHECK(r1.loss == doctest::Approx(r2.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < r1.grad.size(); ++i)
        CHECK(r1.grad[i] == doctest::Approx(r2.grad[i]).epsilon(1e-12));
}

TEST_CASE("loss_and_backward: per-example deltas reassemble the gradient") {
    Rng rng(23);
    ModelParams p = init_kaiming({6, 4, 3}, 24);
    Batch b = random_batch(7, 6, 3, rng);
    ForwardCache cache = forward(p, b.x);
    BackwardResult r = backward(p, cache, b.y);

    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const Mat& delta = r.stats.delta[l];
        const Mat& a = cache.a_hom[l];
        const std::size_t out = p.layers[l].weight.rows();
        const std::size_t in = p.layers[l].weight.cols();
        const std::size_t off = layer_offset(p, l);
        for (std::size_t rr = 0; rr < out; ++rr) {
            for (std::size_t c = 0; c <= in; ++c) {
                double mean = 0.0;
                for (std::size_t i = 0; i < b.size(); ++i) mean += delta(i, rr) * a(i, c);
                mean /= static_cast<double>(b.size());
                const double got =
                    c < in ? r.grad[off + rr * in + c] : r.grad[off + out * in + rr];
                CHECK(std::abs(mean - got) < 1e-12);
            }
        }
    }
}

TEST_CASE("loss_and_backward: bit-identical on identical inputs") {
    Rng rng(29);
    ModelParams p = init_kaiming({6, 5, 4}, 30);
    Batch b = random_batch(9, 6, 4, rng);
    BackwardResult r1 = loss_and_backward(p, b);
    BackwardResult r2 = loss_and_backward(p, b);
    CHECK(r1.loss == r2.loss);
    CHECK(r1.grad == r2.grad);
}

TEST_CASE("logit_gradient: linear layer closed form") {
    ModelParams p = init_kaiming({4, 3}, 31);
    Rng rng(32);
    Vec x = testutil::random_vec(4, rng);
    GradientVec g = logit_gradient(p, x, 1);
    // weight rows: row 1 equals x, rows 0 and 2 are zero; bias picks class 1
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(g[r * 4 + c] == (r == 1 ? x[c] : 0.0));
    for (std::size_t r = 0; r < 3; ++r) CHECK(g[12 + r] == (r == 1 ? 1.0 : 0.0));
}

TEST_CASE("logit_gradient: matches finite differences") {
    Rng rng(33);
    ModelParams p = init_kaiming({6, 4, 3}, 34);
    Vec x = testutil::random_vec(6, rng);
    const std::size_t cls = 2;
    GradientVec g = logit_gradient(p, x, cls);
    Vec fd = testutil::finite_difference_grad(p, [&](const ModelParams& q) {
        Mat xm(1, 6);
        for (std::size_t j = 0; j < 6; ++j) xm(0, j) = x[j];
        return forward(q, xm).logits()(0, cls);
    });
    for (std::size_t i = 0; i < g.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(g[i] - fd[i]) <= std::max(1e-6, 1e-4 * std::abs(fd[i])));
    }
}

TEST_CASE("logit_gradient: softmax-weighted sum equals log-partition gradient") {
    Rng rng(35);
    ModelParams p = init_kaiming({5, 4, 3}, 36);
    Vec x = testutil::random_vec(5, rng);
    Mat xm(1, 5);
    for (std::size_t j = 0; j < 5; ++j) xm(0, j) = x[j];

    ForwardCache cache = forward(p, xm);
    Vec weighted(p.param_count(), 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        axpy(cache.probs(0, c), logit_gradient(p, x, c), weighted);

    Vec fd = testutil::finite_difference_grad(p, [&](const ModelParams& q) {
        const ForwardCache c = forward(q, xm);
        const Mat& z = c.logits();
        double zmax = z(0, 0);
        for (std::size_t c = 1; c < 3; ++c) zmax = std::max(zmax, z(0, c));
        double s = 0.0;
        for (std::size_t c = 0; c < 3; ++c) s += std::exp(z(0, c) - zmax);
        return std::log(s) + zmax;
    });
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(weighted[i] - fd[i]) <= std::max(1e-6, 1e-4 * std::abs(fd[i])));
    }
}

TEST_CASE("logit_gradient: invalid class") {
    ModelParams p = init_kaiming({4, 3}, 37);
    CHECK_THROWS_AS(logit_gradient(p, Vec(4, 0.0), 3), StructuralError);
}

TEST_CASE("sample_labels: one-hot rows are certain") {
    ForwardCache cache;
    cache.probs = Mat(3, 4);
    cache.probs(0, 2) = 1.0;
    cache.probs(1, 0) = 1.0;
    cache.probs(2, 3) = 1.0;
    Rng rng(38);
    auto labels = sample_labels(cache, rng);
    CHECK(labels == std::vector<std::uint8_t>{2, 0, 3});
}

TEST_CASE("sample_labels: uniform rows land near uniform frequencies") {
    const std::size_t n = 100000;
    ForwardCache cache;
    cache.probs = Mat(n, 10, 0.1);
    Rng rng(39);
    auto labels = sample_labels(cache, rng);
    std::vector<std::size_t> counts(10, 0);
    for (auto y : labels) ++counts[y];
    for (std::size_t c = 0; c < 10; ++c)
        CHECK(std::abs(counts[c] / double(n) - 0.1) < 0.01);
}

TEST_CASE("sample_labels: deterministic per seed") {
    Rng rng(44);
    ModelParams p = init_kaiming({5, 4}, 45);
    ForwardCache cache = forward(p, testutil::random_mat(20, 5, rng));
    Rng r1(9), r2(9);
    CHECK(sample_labels(cache, r1) == sample_labels(cache, r2));
}
