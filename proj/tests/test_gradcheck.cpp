#include "grad_helpers.hpp"

#include "ppcm/ops.hpp"

#include <gtest/gtest.h>

using namespace ppcm;

namespace {

constexpr double op_tolerance = 1e-6;

using test::OpFn;
using test::square_sum;

void check_all_inputs(const std::vector<Tensor>& inputs, const OpFn& op, const Shape& out_shape, std::uint64_t seed) {
    EXPECT_LT(test::op_grad_error(inputs, op, out_shape, seed), op_tolerance);
}

} // namespace

TEST(GradCheck, QuadraticIsNearlyExact) {
    test::Rng rng(1);
    const auto x = test::random_tensor(rng, {3, 4}, -5.0, 5.0);
    EXPECT_LT(grad_check(square_sum, x), 1e-9);
}

TEST(GradCheck, DetectsWrongGradient) {
    test::Rng rng(2);
    const auto x = test::random_tensor(rng, {5});
    auto broken = [](Tape& tape, Var v) {
        double s = 0.0;
        for (double e : tape.value(v).data()) s += e * e;
        return tape.record(Tensor(Shape{1}, s), {v}, [v](Tape& t, const Tensor& g) {
            Tensor& dx = t.grad_buffer(v);
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += g[0]; // should be 2x
        });
    };
    EXPECT_GT(grad_check(broken, x), 1e-2);
}

TEST(GradCheck, AddScaleSum) {
    test::Rng rng(3);
    const auto a = test::random_tensor(rng, {2, 3});
    const auto b = test::random_tensor(rng, {2, 3});
    check_all_inputs({a, b}, [](Tape& t, std::vector<Var>& v) { return scale(t, add(t, v[0], v[1]), -1.7); }, {2, 3}, 4);
}

TEST(GradCheck, PatchEmbed) {
    test::Rng rng(5);
    check_all_inputs({test::random_tensor(rng, {2, 3, 4, 6}), test::random_tensor(rng, {4, 3, 2, 2}),
                      test::random_tensor(rng, {4})},
                     [](Tape& t, std::vector<Var>& v) { return patch_embed(t, v[0], v[1], v[2]); }, {2, 4, 2, 3}, 6);
}

TEST(GradCheck, DepthwiseConv) {
    test::Rng rng(7);
    for (std::size_t k : {1u, 3u, 5u}) {
        check_all_inputs({test::random_tensor(rng, {2, 3, 4, 4}), test::random_tensor(rng, {3, k, k}),
                          test::random_tensor(rng, {3})},
                         [](Tape& t, std::vector<Var>& v) { return depthwise_conv(t, v[0], v[1], v[2]); },
                         {2, 3, 4, 4}, 8 + k);
    }
}

TEST(GradCheck, ChannelAffine) {
    test::Rng rng(9);
    check_all_inputs({test::random_tensor(rng, {2, 3, 2, 2}), test::random_tensor(rng, {4, 3}),
                      test::random_tensor(rng, {4})},
                     [](Tape& t, std::vector<Var>& v) { return channel_affine(t, v[0], v[1], v[2]); }, {2, 4, 2, 2},
                     10);
    check_all_inputs({test::random_tensor(rng, {3, 5}), test::random_tensor(rng, {2, 5}), test::random_tensor(rng, {2})},
                     [](Tape& t, std::vector<Var>& v) { return channel_affine(t, v[0], v[1], v[2]); }, {3, 2}, 11);
}

TEST(GradCheck, BatchNormTrainAndEval) {
    test::Rng rng(12);
    const auto x = test::random_tensor(rng, {3, 2, 2, 2}, -2.0, 2.0);
    const auto gamma = test::random_tensor(rng, {2}, 0.5, 1.5);
    const auto beta = test::random_tensor(rng, {2});
    for (auto mode : {NormMode::train, NormMode::eval}) {
        BatchNormState st(2);
        st.running_mean = Tensor(Shape{2}, std::vector<double>{0.3, -0.2});
        st.running_var = Tensor(Shape{2}, std::vector<double>{1.5, 0.7});
        check_all_inputs({x, gamma, beta},
                         [&st, mode](Tape& t, std::vector<Var>& v) {
                             BatchNormState local = st; // keep running stats fixed across probes
                             return batchnorm(t, v[0], v[1], v[2], local, mode);
                         },
                         {3, 2, 2, 2}, 13);
    }
}

TEST(GradCheck, Gelu) {
    test::Rng rng(14);
    check_all_inputs({test::random_tensor(rng, {4, 5}, -4.0, 4.0)},
                     [](Tape& t, std::vector<Var>& v) { return gelu(t, v[0]); }, {4, 5}, 15);
}

TEST(GradCheck, GlobalAvgPool) {
    test::Rng rng(16);
    check_all_inputs({test::random_tensor(rng, {2, 3, 3, 3})},
                     [](Tape& t, std::vector<Var>& v) { return global_avg_pool(t, v[0]); }, {2, 3}, 17);
}

TEST(GradCheck, SoftmaxXent) {
    test::Rng rng(18);
    const auto logits = test::random_tensor(rng, {4, 10}, -3.0, 3.0);
    const std::vector<int> y{1, 9, 0, 4};
    EXPECT_LT(grad_check([&](Tape& t, Var v) { return softmax_xent(t, v, y); }, logits), op_tolerance);
}

TEST(GradCheck, TokenMix) {
    test::Rng rng(19);
    check_all_inputs({test::random_tensor(rng, {2, 3, 2, 2}), test::random_tensor(rng, {4, 4})},
                     [](Tape& t, std::vector<Var>& v) { return token_mix(t, v[0], v[1]); }, {2, 3, 2, 2}, 20);
}

TEST(GradCheck, PermutationPenalty) {
    test::Rng rng(21);
    for (std::size_t n : {1u, 3u, 5u}) {
        const auto u = test::random_tensor(rng, {n, n}, -1.0, 1.0);
        EXPECT_LT(grad_check([](Tape& t, Var v) { return permutation_penalty(t, v); }, u), op_tolerance);
    }
}
