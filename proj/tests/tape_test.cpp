// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/tape.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "qtoken/ops.hpp"
#include "test_util.hpp"

namespace qtoken {
namespace {

using TapeD = Tape<double>;
using VarD = TapeD::Var;
using testing::finite_difference;
using testing::random_tensor;
using testing::relative_error;

constexpr double kStep = 1e-5;
constexpr double kTol64 = 1e-6;

/// Weighted sum against a fixed random tensor, so no op sees a trivially
/// constant upstream gradient (e.g. sum of a softmax row is always 1).
VarD weighted_loss(TapeD& tape, VarD out, std::mt19937_64& rng) {
    const auto& v = tape.value(out);
    auto weights = tape.constant(random_tensor<double>(v.rows(), v.cols(), rng));
    return tape.sum(tape.hadamard(out, weights), Axis::all);
}

void expect_gradients_match(TapeD& tape, VarD loss) {
    const auto grads = tape.gradient(loss);
    for (const auto& name : tape.parameter_names()) {
        const auto fd = finite_difference(tape, loss, name, kStep);
        ASSERT_TRUE(grads.at(name).same_shape(tape.parameter_value(name))) << name;
        EXPECT_LE(relative_error(grads.at(name), fd), kTol64) << name;
    }
}

TEST(Tape, SquareHasAnalyticGradient) {
    TapeD tape;
    auto x = tape.parameter("x", TensorD{{3.0}});
    auto loss = tape.sum(tape.hadamard(x, x), Axis::all);
    EXPECT_DOUBLE_EQ(tape.gradient(loss).at("x")(0, 0), 6.0);
}

TEST(Tape, NonScalarLossIsContractError) {
    TapeD tape;
    auto x = tape.parameter("x", TensorD{{1.0, 2.0}});
    try {
        (void)tape.gradient(x);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::contract);
    }
}

TEST(Tape, DuplicateParameterRejected) {
    TapeD tape;
    tape.parameter("w", TensorD{{1.0}});
    EXPECT_THROW(tape.parameter("w", TensorD{{1.0}}), Error);
}

TEST(Tape, ReplayReproducesRecordedValuesBitForBit) {
    std::mt19937_64 rng(3);
    Tape<float> tape;
    auto x = tape.constant(random_tensor<float>(6, 5, rng));
    auto w = tape.parameter("w", random_tensor<float>(5, 5, rng));
    auto b = tape.parameter("b", random_tensor<float>(1, 5, rng));
    auto t = tape.constant(random_tensor<float>(3, 5, rng));
    auto sim = tape.cosine_rows(t, tape.linear(x, w, b));
    auto p = tape.softmax_rows(sim, 0.07f);
    auto out = tape.sum(p, Axis::cols);
    const TensorF recorded = tape.value(out);
    tape.replay();
    EXPECT_TRUE(bit_equal(recorded, tape.value(out)));
}

TEST(Tape, GradientPerParameterHasParameterShape) {
    std::mt19937_64 rng(4);
    TapeD tape;
    auto x = tape.constant(random_tensor<double>(4, 3, rng));
    auto w = tape.parameter("w", random_tensor<double>(3, 2, rng));
    auto b = tape.parameter("b", random_tensor<double>(1, 2, rng));
    auto unused = tape.parameter("unused", random_tensor<double>(2, 2, rng));
    (void)unused;
    auto loss = tape.sum(tape.linear(x, w, b), Axis::all);
    const auto grads = tape.gradient(loss);
    ASSERT_EQ(grads.size(), 3u);
    EXPECT_EQ(grads.at("w").shape_string(), "3x2");
    EXPECT_EQ(grads.at("b").shape_string(), "1x2");
    EXPECT_EQ(grads.at("unused"), TensorD(2, 2));
}

TEST(TapeGradients, LinearSumAgainstFiniteDifferences) {
    std::mt19937_64 rng(10);
    TapeD tape;
    auto x = tape.constant(random_tensor<double>(5, 4, rng));
    auto w = tape.parameter("w", random_tensor<double>(4, 3, rng));
    auto b = tape.parameter("b", random_tensor<double>(1, 3, rng));
    auto loss = tape.sum(tape.linear(x, w, b), Axis::all);
    expect_gradients_match(tape, loss);
}

TEST(TapeGradients, SoftmaxRowsJacobianVectorProduct) {
    std::mt19937_64 rng(12);
    for (double tau : {0.07, 0.5, 2.0}) {
        TapeD tape;
        auto x = tape.parameter("x", random_tensor<double>(3, 7, rng));
        auto loss = weighted_loss(tape, tape.softmax_rows(x, tau), rng);
        expect_gradients_match(tape, loss);
    }
}

TEST(TapeGradients, EachDifferentiableOp) {
    using Builder = std::function<VarD(TapeD&, std::mt19937_64&)>;
    const std::vector<std::pair<std::string, Builder>> cases = {
        {"matmul",
         [](TapeD& t, std::mt19937_64& r) {
             return t.matmul(t.parameter("a", random_tensor<double>(3, 4, r)),
                             t.parameter("b", random_tensor<double>(4, 2, r)));
         }},
        {"transpose", [](TapeD& t, std::mt19937_64& r) { return t.transpose(t.parameter("a", random_tensor<double>(3, 4, r))); }},
        {"add",
         [](TapeD& t, std::mt19937_64& r) {
             return t.add(t.parameter("a", random_tensor<double>(3, 4, r)), t.parameter("b", random_tensor<double>(3, 4, r)));
         }},
        {"scale", [](TapeD& t, std::mt19937_64& r) { return t.scale(t.parameter("a", random_tensor<double>(2, 3, r)), -1.7); }},
        {"affine", [](TapeD& t, std::mt19937_64& r) { return t.affine(t.parameter("a", random_tensor<double>(2, 3, r)), 0.3, 2.0); }},
        {"scale_by",
         [](TapeD& t, std::mt19937_64& r) {
             return t.scale_by(t.parameter("a", random_tensor<double>(2, 3, r)), t.parameter("s", TensorD{{0.4}}));
         }},
        {"cosine_rows",
         [](TapeD& t, std::mt19937_64& r) {
             return t.cosine_rows(t.parameter("a", random_tensor<double>(4, 6, r)),
                                  t.parameter("b", random_tensor<double>(3, 6, r)));
         }},
        {"relu", [](TapeD& t, std::mt19937_64& r) { return t.relu(t.parameter("a", random_tensor<double>(4, 5, r))); }},
        {"sum_rows", [](TapeD& t, std::mt19937_64& r) { return t.sum(t.parameter("a", random_tensor<double>(4, 5, r)), Axis::rows); }},
        {"sum_cols", [](TapeD& t, std::mt19937_64& r) { return t.sum(t.parameter("a", random_tensor<double>(4, 5, r)), Axis::cols); }},
        {"minmax", [](TapeD& t, std::mt19937_64& r) { return t.minmax(t.parameter("a", random_tensor<double>(7, 1, r))); }},
        {"reshape",
         [](TapeD& t, std::mt19937_64& r) { return t.reshape(t.parameter("a", random_tensor<double>(4, 6, r)), 2, 12); }},
        {"topk_gather_gated",
         [](TapeD& t, std::mt19937_64& r) {
             // well-separated scores so a 1e-5 step cannot change the chosen rows
             return t.topk_gather(t.parameter("x", random_tensor<double>(6, 3, r)),
                                  t.parameter("s", TensorD{{0.1}, {0.9}, {0.5}, {0.7}, {0.2}, {0.3}}), 3, true);
         }},
        {"topk_gather_plain",
         [](TapeD& t, std::mt19937_64& r) {
             return t.topk_gather(t.parameter("x", random_tensor<double>(6, 3, r)),
                                  t.parameter("s", TensorD{{0.1}, {0.9}, {0.5}, {0.7}, {0.2}, {0.3}}), 3, false);
         }},
    };
    for (const auto& [name, build] : cases) {
        SCOPED_TRACE(name);
        std::mt19937_64 rng(77);
        TapeD tape;
        auto out = build(tape, rng);
        auto loss = weighted_loss(tape, out, rng);
        expect_gradients_match(tape, loss);
    }
}

TEST(TapeGradients, TopKGatherRoutesGradientOnlyToSelectedRows) {
    TapeD tape;
    auto x = tape.parameter("x", TensorD{{1, 2}, {3, 4}, {5, 6}});
    auto scores = tape.parameter("s", TensorD{{0.2}, {0.9}, {0.1}});
    auto picked = tape.topk_gather(x, scores, 1, false);
    EXPECT_EQ(tape.selected(picked), (std::vector<std::size_t>{1}));
    const auto grads = tape.gradient(tape.sum(picked, Axis::all));
    EXPECT_EQ(grads.at("x"), (TensorD{{0, 0}, {1, 1}, {0, 0}}));
    EXPECT_EQ(grads.at("s"), TensorD(3, 1));
}

}  // namespace
}  // namespace qtoken
