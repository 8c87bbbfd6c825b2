#include <gtest/gtest.h>

#include "oracles.hpp"
#include "swinecat/tensor.hpp"

using namespace swinecat;
using oracles::max_grad_rel_err;
using oracles::project;
using oracles::random_tensor;

namespace {

TEST(Matmul, IdentityTimesIdentity) {
    Tensor<double> eye({2, 2}, {1, 0, 0, 1});
    Tensor<double> out = matmul(eye, eye);
    EXPECT_EQ(out.vec(), (std::vector<double>{1, 0, 0, 1}));
}

TEST(Matmul, RowSums) {
    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> ones({2, 1}, {1, 1});
    Tensor<double> out = matmul(a, ones);
    EXPECT_EQ(out.shape(), (Shape{2, 1}));
    EXPECT_DOUBLE_EQ(out.data()[0], 3);
    EXPECT_DOUBLE_EQ(out.data()[1], 7);
}

TEST(Matmul, MismatchNamesBothShapes) {
    Tensor<double> a({2, 3});
    Tensor<double> b({4, 2});
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
    Tensor<double> a = random_tensor({3, 4});
    Tensor<double> b = random_tensor({4, 2});
    double err = max_grad_rel_err({a, b}, [&] { return project(matmul(a, b)); });
    EXPECT_LT(err, 1e-3);
}

TEST(Softmax, UniformInput) {
    Tensor<double> x({3}, {0, 0, 0});
    Tensor<double> y = softmax(x, 0);
    for (size_t i = 0; i < 3; ++i) EXPECT_NEAR(y.data()[i], 1.0 / 3.0, 1e-12);
}

TEST(Softmax, LargeMagnitudeStable) {
    Tensor<double> x({2}, {1000, 0});
    Tensor<double> y = softmax(x, 0);
    EXPECT_NEAR(y.data()[0], 1.0, 1e-12);
    EXPECT_NEAR(y.data()[1], 0.0, 1e-12);
    EXPECT_TRUE(std::isfinite(y.data()[0]));
}

TEST(Softmax, MatchesNaiveOracleAndSumsToOne) {
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = 2 + oracles::test_rng().below(6);
        Tensor<double> x = random_tensor({n}, -2.0, 2.0);
        Tensor<double> y = softmax(x, 0);
        auto expect = oracles::naive_softmax(x.vec());
        double sum = 0;
        for (size_t i = 0; i < n; ++i) {
            EXPECT_NEAR(y.data()[i], expect[i], 1e-9);
            EXPECT_GE(y.data()[i], 0.0);
            EXPECT_LE(y.data()[i], 1.0);
            sum += y.data()[i];
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Softmax, MiddleAxis) {
    Tensor<double> x = random_tensor({2, 3, 2});
    Tensor<double> y = softmax(x, 1);
    for (size_t o = 0; o < 2; ++o) {
        for (size_t in = 0; in < 2; ++in) {
            double sum = 0;
            for (size_t l = 0; l < 3; ++l) sum += y.at({o, l, in});
            EXPECT_NEAR(sum, 1.0, 1e-9);
        }
    }
}

TEST(Gelu, ZeroMapsToZero) {
    Tensor<double> x({1}, {0.0});
    EXPECT_DOUBLE_EQ(gelu(x).data()[0], 0.0);
}

TEST(Gelu, AsymptoticallyIdentity) {
    Tensor<double> x({1}, {10.0});
    EXPECT_NEAR(gelu(x).data()[0], 10.0, 1e-6);
}

TEST(Gelu, MatchesQuadratureAtOne) {
    double cdf1 = oracles::quadrature_gaussian_cdf(1.0);
    // frozen from the quadrature oracle: gelu(1) = Phi(1)
    EXPECT_NEAR(cdf1, 0.8413447460685429, 1e-9);
    Tensor<double> x({1}, {1.0});
    EXPECT_NEAR(gelu(x).data()[0], cdf1, 1e-9);
}

TEST(LayerNorm, ConstantRowGivesZeros) {
    Tensor<double> x({1, 4}, {3, 3, 3, 3});
    Tensor<double> gain({4}, {1, 1, 1, 1});
    Tensor<double> bias({4});
    Tensor<double> y = layer_norm(x, gain, bias);
    for (size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.data()[i], 0.0, 1e-9);
}

TEST(LayerNorm, NormalizesMeanAndVariance) {
    size_t width = 16;
    Tensor<double> x = random_tensor({3, width}, -4.0, 4.0);
    Tensor<double> gain({width});
    std::fill(gain.vec().begin(), gain.vec().end(), 1.0);
    Tensor<double> bias({width});
    Tensor<double> y = layer_norm(x, gain, bias);
    for (size_t r = 0; r < 3; ++r) {
        double mu = 0, var = 0;
        for (size_t j = 0; j < width; ++j) mu += y.at({r, j});
        mu /= width;
        for (size_t j = 0; j < width; ++j) {
            double d = y.at({r, j}) - mu;
            var += d * d;
        }
        var /= width;
        EXPECT_LT(std::fabs(mu), 1e-6);
        EXPECT_LT(std::fabs(var - 1.0), 1e-4);
    }
}

TEST(LayerNorm, GainBiasMismatchRejected) {
    Tensor<double> x({2, 4});
    Tensor<double> gain({3});
    Tensor<double> bias({4});
    EXPECT_THROW(layer_norm(x, gain, bias), ShapeError);
}

TEST(Conv1d, IdentityKernel) {
    Tensor<double> z({3}, {1, 2, 3});
    Tensor<double> k({3}, {0, 1, 0});
    EXPECT_EQ(conv1d_channels(z, k).vec(), (std::vector<double>{1, 2, 3}));
}

TEST(Conv1d, ZeroPaddingVisibleAtEdges) {
    Tensor<double> z({3}, {1, 1, 1});
    Tensor<double> k({3}, {1, 1, 1});
    EXPECT_EQ(conv1d_channels(z, k).vec(), (std::vector<double>{2, 3, 2}));
}

TEST(Conv1d, MatchesLoopOracle) {
    Tensor<double> z = random_tensor({8});
    Tensor<double> k = random_tensor({3});
    Tensor<double> out = conv1d_channels(z, k);
    auto expect = oracles::loop_conv1d(z.vec(), k.vec());
    for (size_t i = 0; i < 8; ++i) EXPECT_NEAR(out.data()[i], expect[i], 1e-6);
}

TEST(Conv1d, EvenKernelRejected) {
    Tensor<double> z({4});
    Tensor<double> k({2});
    EXPECT_THROW(conv1d_channels(z, k), ConfigError);
}

TEST(Backward, SumGivesOnes) {
    Tensor<double> x = random_tensor({5}).set_requires_grad(true);
    GradTape<double> tape;
    {
        GradTape<double>::Scope scope(tape);
        Tensor<double> loss = sum_all(x);
        tape.backward(loss);
    }
    for (size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 1.0);
}

TEST(Backward, SumOfSquaresGivesTwoX) {
    Tensor<double> x = random_tensor({6}).set_requires_grad(true);
    GradTape<double> tape;
    {
        GradTape<double>::Scope scope(tape);
        Tensor<double> loss = sum_all(multiply(x, x));
        tape.backward(loss);
    }
    for (size_t i = 0; i < 6; ++i) EXPECT_NEAR(x.grad()[i], 2.0 * x.data()[i], 1e-12);
}

TEST(Backward, NonScalarLossRejected) {
    Tensor<double> x = random_tensor({3}).set_requires_grad(true);
    GradTape<double> tape;
    GradTape<double>::Scope scope(tape);
    Tensor<double> y = multiply(x, x);
    EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, LeafLossRejected) {
    Tensor<double> x = Tensor<double>::scalar(1.0);
    GradTape<double> tape;
    EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, AccumulatesAcrossUses) {
    // y = sum(x) + sum(x) should give grad 2 everywhere
    Tensor<double> x = random_tensor({4}).set_requires_grad(true);
    GradTape<double> tape;
    {
        GradTape<double>::Scope scope(tape);
        Tensor<double> loss = add(sum_all(x), sum_all(x));
        tape.backward(loss);
    }
    for (size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0);
}

TEST(ShapeOps, ReshapePermuteRoundTripBitExact) {
    for (int trial = 0; trial < 20; ++trial) {
        Tensor<double> x = random_tensor({2, 3, 4});
        Tensor<double> r = reshape(reshape(x, {4, 3, 2}), {2, 3, 4});
        EXPECT_EQ(r.vec(), x.vec());
        Tensor<double> p = permute(permute(x, {2, 0, 1}), {1, 2, 0});
        EXPECT_EQ(p.shape(), x.shape());
        EXPECT_EQ(p.vec(), x.vec());
    }
}

TEST(ShapeOps, PermuteMovesValues) {
    Tensor<double> x({2, 2}, {1, 2, 3, 4});
    Tensor<double> t = transpose(x);
    EXPECT_EQ(t.vec(), (std::vector<double>{1, 3, 2, 4}));
}

TEST(ShapeOps, ConcatenateAlongAxis) {
    Tensor<double> a({2, 2}, {1, 2, 3, 4});
    Tensor<double> b({2, 1}, {5, 6});
    Tensor<double> c = concatenate<double>({a, b}, 1);
    EXPECT_EQ(c.shape(), (Shape{2, 3}));
    EXPECT_EQ(c.vec(), (std::vector<double>{1, 2, 5, 3, 4, 6}));
}

TEST(ShapeOps, MeanOverAxes) {
    Tensor<double> x({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor<double> m = mean(x, {1, 2});
    EXPECT_EQ(m.shape(), (Shape{2}));
    EXPECT_DOUBLE_EQ(m.data()[0], 2.5);
    EXPECT_DOUBLE_EQ(m.data()[1], 6.5);
}

TEST(Dropout, EvalModeIsIdentity) {
    Rng rng(7);
    Tensor<double> x = random_tensor({32});
    Tensor<double> y = dropout(x, 0.5, /*train=*/false, rng);
    EXPECT_EQ(y.vec(), x.vec());
}

TEST(Dropout, TrainModeMasksAndScales) {
    Rng rng(7);
    Tensor<double> x({1000});
    std::fill(x.vec().begin(), x.vec().end(), 1.0);
    Tensor<double> y = dropout(x, 0.25, /*train=*/true, rng);
    size_t kept = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y.data()[i] != 0.0) {
            EXPECT_NEAR(y.data()[i], 1.0 / 0.75, 1e-12);
            ++kept;
        }
    }
    EXPECT_GT(kept, 650u);
    EXPECT_LT(kept, 850u);
}

TEST(Dropout, ZeroProbabilityIsIdentityInTrainMode) {
    Rng rng(7);
    Tensor<double> x = random_tensor({16});
    EXPECT_EQ(dropout(x, 0.0, true, rng).vec(), x.vec());
}

TEST(Determinism, SameSeedSameBuffers) {
    auto run = [] {
        Rng rng(1234);
        Tensor<double> a({4, 4});
        for (size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
        Tensor<double> b = matmul(a, a);
        b = softmax(b, 1);
        b = gelu(b);
        return b.vec();
    };
    EXPECT_EQ(run(), run());
}

TEST(Invariants, FiniteAfterForwardOps) {
    for (int trial = 0; trial < 20; ++trial) {
        Tensor<double> a = random_tensor({4, 6}, -50.0, 50.0);
        Tensor<double> b = random_tensor({6, 3}, -50.0, 50.0);
        Tensor<double> out = gelu(softmax(matmul(a, b), 1));
        for (size_t i = 0; i < out.size(); ++i) EXPECT_TRUE(std::isfinite(out.data()[i]));
    }
}

// Finite-difference property: every differentiable op, 100 random instances.
TEST(GradCheck, Add) {
    for (int t = 0; t < 100; ++t) {
        size_t n = 1 + oracles::test_rng().below(8);
        Tensor<double> a = random_tensor({n}), b = random_tensor({n});
        EXPECT_LT(max_grad_rel_err({a, b}, [&] { return project(add(a, b), t); }), 1e-3);
    }
}

TEST(GradCheck, Multiply) {
    for (int t = 0; t < 100; ++t) {
        size_t n = 1 + oracles::test_rng().below(8);
        Tensor<double> a = random_tensor({n}), b = random_tensor({n});
        EXPECT_LT(max_grad_rel_err({a, b}, [&] { return project(multiply(a, b), t); }), 1e-3);
    }
}

TEST(GradCheck, ScaleReshapePermute) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({2, 3, 2});
        auto fn = [&] {
            Tensor<double> y = scale(a, 1.7);
            y = permute(y, {1, 0, 2});
            y = reshape(y, {6, 2});
            return project(y, t);
        };
        EXPECT_LT(max_grad_rel_err({a}, fn), 1e-3);
    }
}

TEST(GradCheck, Concatenate) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({2, 2}), b = random_tensor({2, 3});
        auto fn = [&] { return project(concatenate<double>({a, b}, 1), t); };
        EXPECT_LT(max_grad_rel_err({a, b}, fn), 1e-3);
    }
}

TEST(GradCheck, MeanOverAxes) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({3, 2, 2});
        EXPECT_LT(max_grad_rel_err({a}, [&] { return project(mean(a, {0, 2}), t); }), 1e-3);
    }
}

TEST(GradCheck, Linear) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> x = random_tensor({3, 4});
        Tensor<double> w = random_tensor({4, 2});
        Tensor<double> b = random_tensor({2});
        EXPECT_LT(max_grad_rel_err({x, w, b}, [&] { return project(linear(x, w, b), t); }), 1e-3);
    }
}

TEST(GradCheck, SigmoidGelu) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({7}, -3.0, 3.0);
        EXPECT_LT(max_grad_rel_err({a}, [&] { return project(sigmoid(a), t); }), 1e-3);
        EXPECT_LT(max_grad_rel_err({a}, [&] { return project(gelu(a), t); }), 1e-3);
    }
}

TEST(GradCheck, Softmax) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({2, 5}, -2.0, 2.0);
        EXPECT_LT(max_grad_rel_err({a}, [&] { return project(softmax(a, 1), t); }), 1e-3);
    }
}

TEST(GradCheck, LayerNorm) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> x = random_tensor({2, 6});
        Tensor<double> gain = random_tensor({6}, 0.5, 1.5);
        Tensor<double> bias = random_tensor({6});
        auto fn = [&] { return project(layer_norm(x, gain, bias), t); };
        EXPECT_LT(max_grad_rel_err({x, gain, bias}, fn), 1e-3);
    }
}

TEST(GradCheck, Conv1dChannels) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> z = random_tensor({2, 8});
        Tensor<double> k = random_tensor({3});
        auto fn = [&] { return project(conv1d_channels(z, k), t); };
        EXPECT_LT(max_grad_rel_err({z, k}, fn), 1e-3);
    }
}

TEST(GradCheck, MatmulBmm) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> a = random_tensor({2, 3, 4});
        Tensor<double> b = random_tensor({2, 4, 2});
        EXPECT_LT(max_grad_rel_err({a, b}, [&] { return project(bmm(a, b), t); }), 1e-3);
        Tensor<double> c = random_tensor({2, 5, 4});
        auto fn = [&] { return project(bmm(a, c, /*trans_b=*/true), t); };
        EXPECT_LT(max_grad_rel_err({a, c}, fn), 1e-3);
    }
}

TEST(GradCheck, StructuredOps) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> x = random_tensor({1, 4, 4, 2});
        EXPECT_LT(max_grad_rel_err({x}, [&] { return project(roll2d(x, -1, -1), t); }), 1e-3);

        Tensor<double> w = random_tensor({1, 2}, 0.1, 0.9);
        auto gate = [&] { return project(scale_channels(x, w), t); };
        EXPECT_LT(max_grad_rel_err({x, w}, gate), 1e-3);

        Tensor<double> table = random_tensor({9, 2});
        std::vector<size_t> idx = {0, 3, 3, 8, 1, 0};
        auto emb = [&] { return project(embedding_rows(table, idx), t); };
        EXPECT_LT(max_grad_rel_err({table}, emb), 1e-3);
    }
}

TEST(GradCheck, AttnBiasAdd) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> attn = random_tensor({4, 2, 3, 3});
        Tensor<double> bias = random_tensor({2, 3, 3});
        Tensor<double> mask({2, 3, 3});
        auto fn = [&] { return project(attn_bias_add(attn, bias, mask), t); };
        EXPECT_LT(max_grad_rel_err({attn, bias}, fn), 1e-3);
    }
}

TEST(GradCheck, Dropout) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> x = random_tensor({10});
        // fixed mask per instance: rebuild the rng inside the loss
        auto fn = [&] {
            Rng rng(42 + t);
            return project(dropout(x, 0.3, true, rng), t);
        };
        EXPECT_LT(max_grad_rel_err({x}, fn), 1e-3);
    }
}

TEST(GradCheck, IndexAxis0) {
    for (int t = 0; t < 100; ++t) {
        Tensor<double> x = random_tensor({3, 2, 2});
        EXPECT_LT(max_grad_rel_err({x}, [&] { return project(index_axis0(x, 1), t); }), 1e-3);
    }
}

} // namespace
