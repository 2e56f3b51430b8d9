#include "oracles.hpp"
#include "test_util.hpp"

#include "ppcm/error.hpp"
#include "ppcm/gradcheck.hpp"
#include "ppcm/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ppcm;

namespace {

Tensor run(const std::function<Var(Tape&)>& f) {
    Tape t;
    return t.value(f(t));
}

} // namespace

TEST(Tensor, ShapeChecks) {
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    Tensor t(Shape{2, 3}, 1.5);
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
    EXPECT_THROW(t.reshaped({4}), ShapeError);
}

TEST(Tape, SumGradientIsOnes) {
    Tape t;
    const Var x = t.leaf(Tensor(Shape{2, 3}, 0.7));
    const Var unused = t.leaf(Tensor(Shape{4}, 2.0));
    t.backward(sum(t, x));
    const Tensor gx = t.grad(x), gu = t.grad(unused);
    for (double g : gx.data()) EXPECT_EQ(g, 1.0);
    for (double g : gu.data()) EXPECT_EQ(g, 0.0);
}

TEST(Tape, FanOutAccumulates) {
    Tape t;
    const Var x = t.leaf(Tensor(Shape{3}, 1.0));
    t.backward(sum(t, add(t, x, scale(t, x, 2.0))));
    const Tensor gx = t.grad(x);
    for (double g : gx.data()) EXPECT_EQ(g, 3.0);
}

TEST(Tape, NonScalarLossRejected) {
    Tape t;
    const Var x = t.leaf(Tensor(Shape{3}, 1.0));
    EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Tape, ParameterGradientsAccumulateAcrossPasses) {
    Parameter p("p", Tensor(Shape{2}, 1.0));
    for (int i = 0; i < 2; ++i) {
        Tape t;
        t.backward(sum(t, t.parameter(p)));
    }
    EXPECT_EQ(p.grad[0], 2.0);
    p.trainable = false;
    p.zero_grad();
    Tape t;
    t.backward(sum(t, t.parameter(p)));
    EXPECT_EQ(p.grad[0], 0.0);
}

TEST(PatchEmbed, OneHotWeightSelectsSample) {
    test::Rng rng(1);
    const auto x = test::random_tensor(rng, {2, 3, 4, 4});
    Tensor w(Shape{1, 3, 2, 2});
    w[(1 * 2 + 1) * 2 + 0] = 1.0; // channel 1, row 1, col 0
    const auto out = run([&](Tape& t) {
        return patch_embed(t, t.constant(x), t.constant(w), t.constant(Tensor(Shape{1})));
    });
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t u = 0; u < 2; ++u)
            for (std::size_t v = 0; v < 2; ++v)
                EXPECT_EQ(out[((n * 1) * 2 + u) * 2 + v], x[((n * 3 + 1) * 4 + 2 * u + 1) * 4 + 2 * v]);
}

TEST(PatchEmbed, ZeroInputGivesBias) {
    test::Rng rng(2);
    const auto w = test::random_tensor(rng, {5, 3, 2, 2});
    const auto b = test::random_tensor(rng, {5});
    const auto out = run([&](Tape& t) {
        return patch_embed(t, t.constant(Tensor(Shape{1, 3, 4, 6})), t.constant(w), t.constant(b));
    });
    ASSERT_EQ(out.shape(), (Shape{1, 5, 2, 3}));
    for (std::size_t o = 0; o < 5; ++o)
        for (std::size_t p = 0; p < 6; ++p) EXPECT_EQ(out[o * 6 + p], b[o]);
}

TEST(PatchEmbed, MatchesNaiveLoopsExactly) {
    test::Rng rng(3);
    const auto x = test::random_tensor(rng, {1, 3, 4, 4});
    const auto w = test::random_tensor(rng, {6, 3, 2, 2});
    const auto b = test::random_tensor(rng, {6});
    const auto out = run([&](Tape& t) { return patch_embed(t, t.constant(x), t.constant(w), t.constant(b)); });
    EXPECT_EQ(out, oracle::patch_embed(x, w, b));
}

TEST(PatchEmbed, ShapeErrors) {
    Tape t;
    EXPECT_THROW(patch_embed(t, t.constant(Tensor(Shape{1, 3, 5, 4})), t.constant(Tensor(Shape{2, 3, 2, 2})),
                             t.constant(Tensor(Shape{2}))),
                 ShapeError);
    EXPECT_THROW(patch_embed(t, t.constant(Tensor(Shape{1, 3, 4, 4})), t.constant(Tensor(Shape{2, 3, 2, 2})),
                             t.constant(Tensor(Shape{3}))),
                 ShapeError);
}

TEST(DepthwiseConv, DeltaKernelIsIdentity) {
    test::Rng rng(4);
    const auto x = test::random_tensor(rng, {2, 3, 5, 5});
    Tensor w(Shape{3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) w[c * 9 + 4] = 1.0;
    const auto out = run([&](Tape& t) {
        return depthwise_conv(t, t.constant(x), t.constant(w), t.constant(Tensor(Shape{3})));
    });
    EXPECT_EQ(out, x);
}

TEST(DepthwiseConv, OnesInteriorIsNinePlusBias) {
    const auto out = run([&](Tape& t) {
        return depthwise_conv(t, t.constant(Tensor(Shape{1, 1, 4, 4}, 1.0)), t.constant(Tensor(Shape{1, 3, 3}, 1.0)),
                              t.constant(Tensor(Shape{1}, 0.5)));
    });
    EXPECT_EQ(out[1 * 4 + 1], 9.5);
    EXPECT_EQ(out[2 * 4 + 2], 9.5);
    EXPECT_EQ(out[0], 4.5); // corner sees 4 taps
}

TEST(DepthwiseConv, MatchesNaiveLoopsExactly) {
    test::Rng rng(5);
    for (std::size_t k : {1u, 3u, 5u}) {
        const auto x = test::random_tensor(rng, {1, 2, 5, 5});
        const auto w = test::random_tensor(rng, {2, k, k});
        const auto b = test::random_tensor(rng, {2});
        const auto out = run([&](Tape& t) { return depthwise_conv(t, t.constant(x), t.constant(w), t.constant(b)); });
        EXPECT_EQ(out, oracle::depthwise_conv(x, w, b));
    }
}

TEST(DepthwiseConv, EvenKernelRejected) {
    Tape t;
    EXPECT_THROW(depthwise_conv(t, t.constant(Tensor(Shape{1, 1, 4, 4})), t.constant(Tensor(Shape{1, 2, 2})),
                                t.constant(Tensor(Shape{1}))),
                 InvalidArgument);
}

TEST(ChannelAffine, IdentityAndBias) {
    test::Rng rng(6);
    const auto x = test::random_tensor(rng, {2, 3, 2, 2});
    Tensor eye(Shape{3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    EXPECT_EQ(run([&](Tape& t) { return channel_affine(t, t.constant(x), t.constant(eye), t.constant(Tensor(Shape{3}))); }),
              x);
    const auto b = test::random_tensor(rng, {4});
    const auto w = test::random_tensor(rng, {4, 3});
    const auto out = run([&](Tape& t) {
        return channel_affine(t, t.constant(Tensor(Shape{2, 3})), t.constant(w), t.constant(b));
    });
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 4; ++o) EXPECT_EQ(out[n * 4 + o], b[o]);
}

TEST(ChannelAffine, MatchesNaiveLoopsExactly) {
    test::Rng rng(7);
    const auto w = test::random_tensor(rng, {5, 3});
    const auto b = test::random_tensor(rng, {5});
    for (const Shape& s : {Shape{2, 3, 3, 3}, Shape{4, 3}}) {
        const auto x = test::random_tensor(rng, s);
        const auto out = run([&](Tape& t) { return channel_affine(t, t.constant(x), t.constant(w), t.constant(b)); });
        EXPECT_EQ(out, oracle::channel_affine(x, w, b));
    }
    Tape t;
    EXPECT_THROW(channel_affine(t, t.constant(Tensor(Shape{2, 4})), t.constant(w), t.constant(b)), ShapeError);
}

TEST(BatchNorm, ConstantInputNormalisesToZero) {
    BatchNormState st(2);
    const auto out = run([&](Tape& t) {
        return batchnorm(t, t.constant(Tensor(Shape{2, 2, 3, 3}, 4.0)), t.constant(Tensor(Shape{2}, 1.0)),
                         t.constant(Tensor(Shape{2})), st, NormMode::train);
    });
    for (double v : out.data()) EXPECT_LE(std::abs(v), 1e-2);
}

TEST(BatchNorm, ZeroGammaGivesBeta) {
    test::Rng rng(8);
    BatchNormState st(3);
    const auto x = test::random_tensor(rng, {2, 3, 2, 2});
    const Tensor beta(Shape{3}, std::vector<double>{0.5, -1.0, 2.0});
    for (auto mode : {NormMode::train, NormMode::eval}) {
        const auto out = run([&](Tape& t) {
            return batchnorm(t, t.constant(x), t.constant(Tensor(Shape{3})), t.constant(beta), st, mode);
        });
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(out[(n * 3 + c) * 4 + p], beta[c]);
    }
}

TEST(BatchNorm, BatchStatisticsAreStandardised) {
    test::Rng rng(9);
    BatchNormState st(3);
    // Large spread keeps eps / var below 1e-6.
    const auto x = test::random_tensor(rng, {4, 3, 5, 5}, -500.0, 500.0);
    const auto out = run([&](Tape& t) {
        return batchnorm(t, t.constant(x), t.constant(Tensor(Shape{3}, 1.0)), t.constant(Tensor(Shape{3})), st,
                         NormMode::train);
    });
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t p = 0; p < 25; ++p) mean += out[(n * 3 + c) * 25 + p];
        mean /= 100.0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t p = 0; p < 25; ++p) var += std::pow(out[(n * 3 + c) * 25 + p] - mean, 2);
        var /= 100.0;
        EXPECT_NEAR(mean, 0.0, 1e-6);
        EXPECT_NEAR(var, 1.0, 1e-6);
    }
}

TEST(BatchNorm, RunningStatsUpdateAndDegenerateBatch) {
    BatchNormState st(1);
    Tensor x(Shape{2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
    run([&](Tape& t) {
        return batchnorm(t, t.constant(x), t.constant(Tensor(Shape{1}, 1.0)), t.constant(Tensor(Shape{1})), st,
                         NormMode::train);
    });
    EXPECT_DOUBLE_EQ(st.running_mean[0], 0.2);             // 0.9 * 0 + 0.1 * 2
    EXPECT_DOUBLE_EQ(st.running_var[0], 0.9 + 0.1 * 2.0);  // unbiased variance 2
    Tape t;
    EXPECT_THROW(batchnorm(t, t.constant(Tensor(Shape{1, 1, 1, 1})), t.constant(Tensor(Shape{1}, 1.0)),
                           t.constant(Tensor(Shape{1})), st, NormMode::train),
                 InvalidArgument);
}

TEST(Gelu, ReferenceValues) {
    EXPECT_EQ(gelu_value(0.0), 0.0);
    EXPECT_NEAR(gelu_value(1.0), 0.8413447460685429, 1e-15);
    const double tail = gelu_value(-10.0);
    EXPECT_LT(tail, 0.0);
    EXPECT_GT(tail, -1e-20);
}

TEST(GlobalAvgPool, ConstantSingleAndNaive) {
    const auto c = run([](Tape& t) { return global_avg_pool(t, t.constant(Tensor(Shape{2, 3, 4, 4}, 2.5))); });
    for (double v : c.data()) EXPECT_EQ(v, 2.5);
    test::Rng rng(10);
    const auto one = test::random_tensor(rng, {2, 3, 1, 1});
    EXPECT_EQ(run([&](Tape& t) { return global_avg_pool(t, t.constant(one)); }).data()[4], one[4]);
    const auto x = test::random_tensor(rng, {2, 3, 3, 3});
    EXPECT_EQ(run([&](Tape& t) { return global_avg_pool(t, t.constant(x)); }), oracle::global_avg_pool(x));
}

TEST(SoftmaxXent, KnownValues) {
    const std::vector<int> y0{0};
    auto loss = run([&](Tape& t) { return softmax_xent(t, t.constant(Tensor(Shape{1, 2}, 0.3)), y0); });
    EXPECT_NEAR(loss[0], std::log(2.0), 1e-15);
    loss = run([&](Tape& t) {
        return softmax_xent(t, t.constant(Tensor(Shape{1, 3}, std::vector<double>{1000.0, 0.0, 0.0})), y0);
    });
    EXPECT_NEAR(loss[0], 0.0, 1e-12);
}

TEST(SoftmaxXent, MatchesExtendedPrecision) {
    test::Rng rng(11);
    const auto logits = test::random_tensor(rng, {4, 10}, -3.0, 3.0);
    const std::vector<int> y{3, 0, 9, 5};
    const auto loss = run([&](Tape& t) { return softmax_xent(t, t.constant(logits), y); });
    EXPECT_NEAR(loss[0], static_cast<double>(oracle::softmax_xent(logits, y)), 1e-14);
}

TEST(SoftmaxXent, LabelErrors) {
    Tape t;
    const std::vector<int> bad{2};
    EXPECT_THROW(softmax_xent(t, t.constant(Tensor(Shape{1, 2})), bad), InvalidArgument);
    const std::vector<int> neg{-1};
    EXPECT_THROW(softmax_xent(t, t.constant(Tensor(Shape{1, 2})), neg), InvalidArgument);
    const std::vector<int> two{0, 1};
    EXPECT_THROW(softmax_xent(t, t.constant(Tensor(Shape{1, 2})), two), ShapeError);
}

TEST(TokenMix, IdentityAndPermutation) {
    test::Rng rng(12);
    const auto x = test::random_tensor(rng, {2, 3, 2, 2});
    Tensor eye(Shape{4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    EXPECT_EQ(run([&](Tape& t) { return token_mix(t, t.constant(x), t.constant(eye)); }), x);

    // Row t has its one at column src[t]: output token t = input token src[t].
    const std::size_t src[4] = {2, 0, 3, 1};
    Tensor p(Shape{4, 4});
    for (std::size_t r = 0; r < 4; ++r) p[r * 4 + src[r]] = 1.0;
    const auto out = run([&](Tape& t) { return token_mix(t, t.constant(x), t.constant(p)); });
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t tt = 0; tt < 4; ++tt) EXPECT_EQ(out[r * 4 + tt], x[r * 4 + src[tt]]);
}
