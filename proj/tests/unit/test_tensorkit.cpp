#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "idgen/adam.hpp"
#include "idgen/layers.hpp"
#include "idgen/ops.hpp"
#include "idgen/rng.hpp"
#include "idgen/tensor.hpp"

using namespace idgen;

TEST_CASE("tensor construction enforces shape/data agreement") {
    CHECK_THROWS(Tensor::from({2, 2}, {1.0f, 2.0f, 3.0f}));
    CHECK_THROWS(Tensor::zeros({2, 0, 3}));
    CHECK_THROWS(Tensor::zeros({2, 2, 2, 2, 2}));
    Tensor t = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.numel() == 4);
}

TEST_CASE("non-finite op outputs are an error state") {
    Tensor x = Tensor::from({2}, {1.0f, 2.0f});
    CHECK_THROWS(add_scalar(x, std::numeric_limits<float>::infinity()));
    CHECK_THROWS(scale(x, std::numeric_limits<float>::quiet_NaN()));
}

TEST_CASE("matmul basics") {
    Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor c = matmul(eye, a);
    for (int i = 0; i < 4; ++i) CHECK(c[i] == a[i]);

    Tensor row = Tensor::from({1, 2}, {1, 2});
    Tensor col = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).item() == doctest::Approx(11.0f));

    Tensor bad = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS(matmul(a, bad));
}

TEST_CASE("matmul gradient matches finite differences") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Tensor a = randn({3, 4}, rng);
        Tensor b = randn({4, 5}, rng);
        Tensor r = randn({3, 5}, rng);
        auto f = [&r](std::vector<Tensor>& leaves) {
            return sum(mul(matmul(leaves[0], leaves[1]), r));
        };
        auto res = gradcheck::check(f, {a, b});
        CHECK_MESSAGE(res.ok, res.detail);
    }
}

TEST_CASE("conv2d basics") {
    Rng rng(0);
    Tensor x = randn({1, 2, 4, 4}, rng);
    Tensor w1 = Tensor::from({2, 2, 1, 1}, {1, 0, 0, 1});  // per-channel identity
    SUBCASE("1x1 identity kernel reproduces input") {
        Tensor y = conv2d(x, w1, Tensor(), 1, 0);
        REQUIRE(y.shape == x.shape);
        for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
    }
    SUBCASE("all-ones 3x3 kernel on all-ones input sums to 9") {
        Tensor ones = Tensor::full({1, 1, 5, 5}, 1.0f);
        Tensor k = Tensor::full({1, 1, 3, 3}, 1.0f);
        Tensor y = conv2d(ones, k, Tensor(), 1, 0);
        REQUIRE(y.shape == std::vector<int>{1, 1, 3, 3});
        for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(9.0f));
    }
    SUBCASE("invalid stride/pad rejected") {
        Tensor k = Tensor::full({1, 2, 3, 3}, 1.0f);
        CHECK_THROWS(conv2d(x, k, Tensor(), 0, 1));
        CHECK_THROWS(conv2d(x, k, Tensor(), 1, -1));
        Tensor big = Tensor::full({1, 2, 7, 7}, 1.0f);
        CHECK_THROWS(conv2d(x, big, Tensor(), 1, 0));
    }
}

TEST_CASE("conv2d gradient matches finite differences") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Tensor x = randn({2, 2, 5, 5}, rng);
        Tensor w = randn({3, 2, 3, 3}, rng, 0.5f);
        Tensor b = randn({3}, rng, 0.5f);
        const int stride = (seed % 2 == 0) ? 1 : 2;
        const int pad = (seed % 2 == 0) ? 1 : 0;
        Rng rng2(seed + 100);
        const int ho = (5 + 2 * pad - 3) / stride + 1;
        Tensor r = randn({2, 3, ho, ho}, rng2);
        auto f = [&r, stride, pad](std::vector<Tensor>& leaves) {
            return sum(mul(conv2d(leaves[0], leaves[1], leaves[2], stride, pad), r));
        };
        auto res = gradcheck::check(f, {x, w, b});
        CHECK_MESSAGE(res.ok, res.detail);
    }
}

TEST_CASE("softmax values") {
    Tensor z = Tensor::from({3}, {0, 0, 0});
    Tensor s = softmax(z, 0);
    for (int i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0f / 3.0f));

    CHECK(softmax(Tensor::from({1}, {42.0f}), 0).item() == doctest::Approx(1.0f));

    Tensor big = Tensor::from({2}, {1000.0f, 1000.0f});
    Tensor sb = softmax(big, 0);
    CHECK(sb[0] == doctest::Approx(0.5f));
    CHECK(sb[1] == doctest::Approx(0.5f));

    CHECK_THROWS(softmax(z, 1));
}

TEST_CASE("softmax rows are a distribution on random shapes") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const int axis = static_cast<int>(seed % 3);
        Tensor x = randn({2, 3, 4}, rng, 3.0f);
        Tensor y = softmax(x, axis);
        std::size_t outer = 1, inner = 1;
        for (int i = 0; i < axis; ++i) outer *= y.shape[i];
        for (int i = axis + 1; i < 3; ++i) inner *= y.shape[i];
        const int n = y.shape[axis];
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < inner; ++j) {
                double total = 0.0;
                for (int k = 0; k < n; ++k) {
                    const float v = y[(o * n + k) * inner + j];
                    CHECK(v >= 0.0f);
                    total += v;
                }
                CHECK(std::abs(total - 1.0) < 1e-5);
            }
    }
}

TEST_CASE("backward basics") {
    SUBCASE("sum gives ones") {
        Tensor x = Tensor::from({3}, {5, -1, 2}, true);
        Tensor loss = sum(x);
        backward(loss);
        for (int i = 0; i < 3; ++i) CHECK((*x.grad)[i] == doctest::Approx(1.0f));
    }
    SUBCASE("sum of squares gives 2x") {
        Tensor x = Tensor::from({2}, {1, 2}, true);
        Tensor loss = sum(mul(x, x));
        backward(loss);
        CHECK((*x.grad)[0] == doctest::Approx(2.0f));
        CHECK((*x.grad)[1] == doctest::Approx(4.0f));
    }
    SUBCASE("repeated backward accumulates at leaves") {
        Tensor x = Tensor::from({2}, {1, 2}, true);
        Tensor loss = sum(x);
        backward(loss);
        backward(loss);
        CHECK((*x.grad)[0] == doctest::Approx(2.0f));
    }
    SUBCASE("non-scalar loss rejected") {
        Tensor x = Tensor::from({2}, {1, 2}, true);
        Tensor y = add(x, x);
        CHECK_THROWS(backward(y));
    }
}

TEST_CASE("composite conv -> norm -> attention -> mse graph passes gradcheck") {
    for (uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(seed);
        Tensor x = randn({1, 2, 4, 4}, rng, 0.5f);
        Tensor cw = randn({3, 2, 3, 3}, rng, 0.4f);
        Tensor cb = randn({3}, rng, 0.2f);
        Tensor gamma = rand_uniform({3}, rng, 0.5f, 1.5f);
        Tensor beta = randn({3}, rng, 0.2f);
        Tensor wq = randn({3, 4}, rng, 0.5f);
        Tensor wk = randn({6, 4}, rng, 0.5f);
        Tensor wv = randn({6, 4}, rng, 0.5f);
        Tensor g = randn({2, 6}, rng, 0.7f);  // two guidance tokens
        Tensor target = randn({16, 4}, rng, 0.5f);

        auto f = [&](std::vector<Tensor>& leaves) {
            Tensor h = conv2d(leaves[0], leaves[1], leaves[2], 1, 1);
            h = layer_norm(h, leaves[3], leaves[4]);
            Tensor f2 = reshape(h, {3, 16});
            Tensor fm = transpose(f2);                       // [16,3]
            Tensor q = matmul(fm, leaves[5]);                // [16,4]
            Tensor k = matmul(leaves[8], leaves[6]);         // [2,4]
            Tensor v = matmul(leaves[8], leaves[7]);         // [2,4]
            Tensor logits = scale(matmul(q, transpose(k)), 0.5f);
            Tensor attn = softmax(logits, 1);
            Tensor out = matmul(attn, v);
            return mse(out, target);
        };
        auto res = gradcheck::check(f, {x, cw, cb, gamma, beta, wq, wk, wv, g}, 5e-3f);
        CHECK_MESSAGE(res.ok, res.detail);
    }
}

TEST_CASE("elementwise and shape ops pass gradcheck") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        Tensor a = randn({2, 6}, rng);
        Tensor b = randn({2, 6}, rng);
        Tensor bias = randn({6}, rng);
        Tensor r = randn({2, 3}, rng);
        auto f = [&r](std::vector<Tensor>& leaves) {
            Tensor s = silu(add(leaves[0], leaves[2]));
            Tensor d = sub(s, leaves[1]);
            Tensor sl = slice(d, 1, 1, 3);
            Tensor cc = concat({sl, sl}, 0);             // [4,3]
            Tensor m = mean_axis(reshape(cc, {2, 2, 3}), 1);
            return sum(mul(m, r));
        };
        auto res = gradcheck::check(f, {a, b, bias});
        CHECK_MESSAGE(res.ok, res.detail);
    }
}

TEST_CASE("upsample_nearest2x forward and gradient") {
    Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor y = upsample_nearest2x(x);
    REQUIRE(y.shape == std::vector<int>{1, 1, 4, 4});
    CHECK(y[0] == 1.0f);
    CHECK(y[1] == 1.0f);
    CHECK(y[2] == 2.0f);
    CHECK(y[5] == 1.0f);
    CHECK(y[15] == 4.0f);

    Rng rng(7);
    Tensor xr = randn({2, 2, 3, 3}, rng);
    Tensor r = randn({2, 2, 6, 6}, rng);
    auto f = [&r](std::vector<Tensor>& leaves) {
        return sum(mul(upsample_nearest2x(leaves[0]), r));
    };
    auto res = gradcheck::check(f, {xr});
    CHECK_MESSAGE(res.ok, res.detail);
}

TEST_CASE("cross_entropy matches a log-softmax oracle and trains") {
    Tensor logits = Tensor::from({2, 3}, {2, 1, 0, 0, 0, 5}, true);
    std::vector<int> labels = {0, 2};
    Tensor loss = cross_entropy(logits, labels);
    // oracle: -log softmax at label
    auto nll = [&](int row, int lab) {
        double denom = 0;
        for (int k = 0; k < 3; ++k) denom += std::exp(static_cast<double>(logits[row * 3 + k]));
        return -std::log(std::exp(static_cast<double>(logits[row * 3 + lab])) / denom);
    };
    CHECK(loss.item() == doctest::Approx(0.5 * (nll(0, 0) + nll(1, 2))).epsilon(1e-5));

    Rng rng(1);
    Tensor l2 = randn({4, 5}, rng);
    std::vector<int> y2 = {1, 4, 0, 2};
    auto f = [&y2](std::vector<Tensor>& leaves) { return cross_entropy(leaves[0], y2); };
    auto res = gradcheck::check(f, {l2});
    CHECK_MESSAGE(res.ok, res.detail);

    CHECK_THROWS(cross_entropy(l2, {0, 1}));
    CHECK_THROWS(cross_entropy(l2, {0, 1, 2, 9}));
}

TEST_CASE("forward results are bit-identical across runs") {
    Rng rng(3);
    Tensor x = randn({2, 3, 8, 8}, rng);
    Tensor w = randn({4, 3, 3, 3}, rng);
    Tensor b = randn({4}, rng);
    Tensor y1 = conv2d(x, w, b, 1, 1);
    Tensor y2 = conv2d(x, w, b, 1, 1);
    for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
    Tensor s1 = softmax(reshape(y1, {2, 256}), 1);
    Tensor s2 = softmax(reshape(y2, {2, 256}), 1);
    for (std::size_t i = 0; i < s1.numel(); ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves params unchanged") {
        Tensor p = Tensor::from({2}, {0.5f, -0.25f}, true);
        std::vector<Tensor> params = {p};
        AdamState st = adam_init(params, 0.1f);
        adam_step(params, st);
        CHECK(p[0] == 0.5f);
        CHECK(p[1] == -0.25f);
    }
    SUBCASE("descends on x^2") {
        Tensor p = Tensor::from({1}, {1.0f}, true);
        std::vector<Tensor> params = {p};
        AdamState st = adam_init(params, 0.1f);
        Tensor loss = sum(mul(p, p));
        backward(loss);
        adam_step(params, st);
        CHECK(p[0] < 1.0f);
    }
    SUBCASE("200 steps on a 2-d quadratic reach loss < 1e-4") {
        Tensor p = Tensor::from({2}, {1.0f, -0.8f}, true);
        std::vector<Tensor> params = {p};
        AdamState st = adam_init(params, 0.05f);
        float final_loss = 0.0f;
        for (int i = 0; i < 200; ++i) {
            p.zero_grad();
            Tensor d = sub(p, Tensor::from({2}, {0.3f, -0.2f}));
            Tensor w = Tensor::from({2}, {1.0f, 2.0f});
            Tensor loss = sum(mul(w, mul(d, d)));
            backward(loss);
            adam_step(params, st);
            final_loss = loss.item();
        }
        CHECK(final_loss < 1e-4f);
    }
    SUBCASE("rejects non-positive lr") {
        Tensor p = Tensor::from({1}, {1.0f}, true);
        std::vector<Tensor> params = {p};
        CHECK_THROWS(adam_init(params, 0.0f));
    }
}

TEST_CASE("layer_norm normalizes per sample with per-channel affine") {
    Rng rng(11);
    Tensor x = randn({2, 3, 4, 4}, rng, 2.0f);
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta = Tensor::zeros({3});
    Tensor y = layer_norm(x, gamma, beta);
    for (int b = 0; b < 2; ++b) {
        double m = 0, v = 0;
        for (int i = 0; i < 48; ++i) m += y[b * 48 + i];
        m /= 48;
        for (int i = 0; i < 48; ++i) {
            const double d = y[b * 48 + i] - m;
            v += d * d;
        }
        v /= 48;
        CHECK(std::abs(m) < 1e-5);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-3));
    }

    Tensor g2 = rand_uniform({3}, rng, 0.5f, 1.5f);
    Tensor b2 = randn({3}, rng, 0.3f);
    Tensor r = randn({2, 3, 4, 4}, rng);
    auto f = [&r](std::vector<Tensor>& leaves) {
        return sum(mul(layer_norm(leaves[0], leaves[1], leaves[2]), r));
    };
    auto res = gradcheck::check(f, {x, g2, b2}, 5e-3f);
    CHECK_MESSAGE(res.ok, res.detail);
}
