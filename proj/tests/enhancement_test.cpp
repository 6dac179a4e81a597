// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qtoken/enhancement.hpp"
#include "qtoken/ops.hpp"
#include "test_util.hpp"

namespace qtoken {
namespace {

using testing::max_abs_diff;
using testing::random_tensor;

TensorD repeat_row(const TensorD& row, std::size_t times) {
    TensorD out(times, row.cols());
    for (std::size_t i = 0; i < times; ++i) {
        std::copy(row.row(0).begin(), row.row(0).end(), out.row(i).begin());
    }
    return out;
}

TensorD permute_rows(const TensorD& x, const std::vector<std::size_t>& perm) {
    return gather_rows(x, std::span<const std::size_t>(perm));
}

TEST(Attention, SingletonKeyReturnsItsValue) {
    std::mt19937_64 rng(1);
    const auto q = random_tensor<double>(5, 4, rng);
    const auto k = random_tensor<double>(1, 4, rng);
    const auto v = random_tensor<double>(1, 4, rng);
    EXPECT_EQ(token_wise_attention(q, k, v), repeat_row(v, 5));
}

TEST(Attention, IdenticalKeysAverageValues) {
    std::mt19937_64 rng(2);
    const auto q = random_tensor<double>(3, 4, rng);
    const auto k = repeat_row(random_tensor<double>(1, 4, rng), 6);
    const auto v = random_tensor<double>(6, 4, rng);
    const auto mean = scale(sum_cols(v), 1.0 / 6.0);
    EXPECT_LE(max_abs_diff(token_wise_attention(q, k, v), repeat_row(mean, 3)), 1e-15);
}

TEST(Attention, JointPermutationInvariance) {
    std::mt19937_64 rng(3);
    const auto q = random_tensor<float>(7, 8, rng).cast<double>();
    const auto k = random_tensor<double>(9, 8, rng);
    const auto v = random_tensor<double>(9, 8, rng);
    std::vector<std::size_t> perm(9);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = token_wise_attention(q, k, v);
    const auto b = token_wise_attention(q, permute_rows(k, perm), permute_rows(v, perm));
    EXPECT_LE(max_abs_diff(a, b), 1e-6);
}

TEST(Attention, OutputsStayInsideValueHull) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t r = 1 + rng() % 12;
        const auto q = random_tensor<float>(1 + rng() % 6, 5, rng, -3, 3);
        const auto kv = random_tensor<float>(r, 5, rng, -3, 3);
        const auto out = token_wise_attention(q, kv, kv);
        ASSERT_EQ(out.rows(), q.rows());
        for (std::size_t j = 0; j < 5; ++j) {
            float lo = kv(0, j);
            float hi = kv(0, j);
            for (std::size_t i = 1; i < r; ++i) {
                lo = std::min(lo, kv(i, j));
                hi = std::max(hi, kv(i, j));
            }
            for (std::size_t i = 0; i < out.rows(); ++i) {
                EXPECT_GE(out(i, j), lo - 1e-6f);
                EXPECT_LE(out(i, j), hi + 1e-6f);
            }
        }
    }
}

TEST(Attention, DuplicateRowDoublesItsWeight) {
    std::mt19937_64 rng(5);
    const auto q = random_tensor<double>(2, 3, rng);
    const auto k = random_tensor<double>(3, 3, rng);
    const auto v = random_tensor<double>(3, 3, rng);
    const std::vector<std::size_t> with_dup{0, 1, 2, 1};
    const auto got = token_wise_attention(q, permute_rows(k, with_dup), permute_rows(v, with_dup));
    for (std::size_t i = 0; i < 2; ++i) {
        double weights[3];
        double total = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            double dot = 0;
            for (std::size_t p = 0; p < 3; ++p) {
                dot += q(i, p) * k(j, p);
            }
            weights[j] = std::exp(dot / std::sqrt(3.0)) * (j == 1 ? 2.0 : 1.0);
            total += weights[j];
        }
        for (std::size_t p = 0; p < 3; ++p) {
            double want = 0;
            for (std::size_t j = 0; j < 3; ++j) {
                want += weights[j] / total * v(j, p);
            }
            EXPECT_NEAR(got(i, p), want, 1e-6);
        }
    }
}

TEST(Attention, ShapePreservationAndErrors) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t nq = 1 + rng() % 10;
        const std::size_t r = 1 + rng() % 10;
        const std::size_t d = 1 + rng() % 10;
        const auto out = token_wise_attention(random_tensor<double>(nq, d, rng), random_tensor<double>(r, d, rng),
                                              random_tensor<double>(r, d, rng));
        EXPECT_EQ(out.rows(), nq);
        EXPECT_EQ(out.cols(), d);
    }
    const auto q = random_tensor<double>(2, 3, rng);
    try {
        (void)token_wise_attention(q, TensorD(0, 3), TensorD(0, 3));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
    }
    EXPECT_THROW((void)token_wise_attention(q, TensorD(2, 3, 1.0), TensorD(3, 3, 1.0)), Error);
    EXPECT_THROW((void)token_wise_attention(q, TensorD(2, 4, 1.0), TensorD(2, 3, 1.0)), Error);
}

TEST(Attention, ProjectionsAndDk) {
    std::mt19937_64 rng(7);
    const auto q = random_tensor<double>(3, 4, rng);
    const auto kv = random_tensor<double>(5, 4, rng);
    AttentionParams<double> params;
    params.q_proj = Linear<double>::dense(random_tensor<double>(4, 2, rng), TensorD(1, 2));
    params.k_proj = Linear<double>::dense(random_tensor<double>(4, 2, rng), TensorD(1, 2));
    params.d_k = 2;
    const auto out = token_wise_attention(q, kv, kv, params);
    const auto scores = matmul(params.q_proj->apply(q), transpose(params.k_proj->apply(kv)));
    const auto want = matmul(softmax_rows(scores, std::sqrt(2.0)), kv);
    EXPECT_TRUE(bit_equal(out, want));
}

TEST(SpatialRestoration, SingleSupportRow) {
    std::mt19937_64 rng(8);
    const auto q = random_tensor<double>(4, 6, rng);
    const auto e = random_tensor<double>(1, 6, rng);
    EXPECT_EQ(spatial_restoration(q, e), repeat_row(e, 4));
}

TEST(SpatialRestoration, SelfRetrievalWithSharpScores) {
    // Scaled one-hot-ish rows: each query's own key dominates the softmax.
    const std::size_t n = 6;
    TensorD e(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        e(i, i) = 8.0;
        e(i, (i + 1) % n) = 0.05;
    }
    const auto out = spatial_restoration(e, e);
    EXPECT_LE(max_abs_diff(out, e), 1e-6);
}

TEST(SpatialRestoration, SupportSetShape) {
    std::mt19937_64 rng(9);
    const auto q = random_tensor<float>(49, 32, rng);
    const auto e = random_tensor<float>(49 * 6, 32, rng);
    const auto out = spatial_restoration(q, e);
    EXPECT_EQ(out.rows(), 49u);
    EXPECT_EQ(out.cols(), 32u);
}

TEST(TemporalEnhancement, SingleFrame) {
    std::mt19937_64 rng(10);
    const auto q = random_tensor<double>(3, 5, rng);
    const auto frame = random_tensor<double>(1, 5, rng);
    EXPECT_EQ(temporal_enhancement(q, frame), repeat_row(frame, 3));
}

TEST(TemporalEnhancement, FourFramesStayInHull) {
    std::mt19937_64 rng(11);
    const auto q = random_tensor<double>(8, 6, rng);
    const auto frames = random_tensor<double>(4, 6, rng);
    const auto out = temporal_enhancement(q, frames);
    for (std::size_t j = 0; j < 6; ++j) {
        double lo = frames(0, j);
        double hi = frames(0, j);
        for (std::size_t f = 1; f < 4; ++f) {
            lo = std::min(lo, frames(f, j));
            hi = std::max(hi, frames(f, j));
        }
        for (std::size_t i = 0; i < 8; ++i) {
            EXPECT_GE(out(i, j), lo - 1e-12);
            EXPECT_LE(out(i, j), hi + 1e-12);
        }
    }
}

TEST(TemporalEnhancement, DuplicateFrames) {
    std::mt19937_64 rng(12);
    const auto q = random_tensor<double>(4, 5, rng);
    const auto frames = random_tensor<double>(2, 5, rng);
    const std::vector<std::size_t> dup{0, 0, 1};
    const auto got = temporal_enhancement(q, permute_rows(frames, dup));
    // Doubling frame 0's weight equals shifting its key score by log 2.
    const auto scores = scale(matmul(q, transpose(frames)), 1.0 / std::sqrt(5.0));
    TensorD shifted = scores;
    for (std::size_t i = 0; i < 4; ++i) {
        shifted(i, 0) += std::log(2.0);
    }
    const auto want = matmul(softmax_rows(shifted, 1.0), frames);
    EXPECT_LE(max_abs_diff(got, want), 1e-6);
}

TEST(Fuse, Cases) {
    std::mt19937_64 rng(13);
    const auto s = random_tensor<double>(3, 4, rng);
    const auto t = random_tensor<double>(3, 4, rng);
    const Mlp<double> none;
    EXPECT_TRUE(bit_equal(fuse<double>(s, nullptr, none), s));
    EXPECT_TRUE(bit_equal(fuse(s, &t, Mlp<double>::identity(4)), add(s, t)));
    const Mlp<double> mlp({Linear<double>::dense(random_tensor<double>(4, 4, rng), random_tensor<double>(1, 4, rng))});
    const TensorD zeros(3, 4);
    EXPECT_TRUE(bit_equal(fuse<double>(s, nullptr, mlp), mlp.apply(s)));
    EXPECT_LE(max_abs_diff(fuse(s, &zeros, mlp), mlp.apply(s)), 0.0);
    EXPECT_TRUE(bit_equal(fuse<double>(s, nullptr, mlp, true), add(mlp.apply(s), s)));
    const TensorD wrong(2, 4);
    EXPECT_THROW((void)fuse(s, &wrong, mlp), Error);
}

TEST(Enhance, MissingTemporalIsZero) {
    std::mt19937_64 rng(14);
    const auto q = random_tensor<float>(5, 6, rng);
    const auto support = random_tensor<float>(12, 6, rng);
    const auto frames = random_tensor<float>(3, 6, rng);
    EnhancementParams<float> params;
    const auto without = enhance<float>(q, support, nullptr, params);
    EXPECT_EQ(without.temporal, TensorF(5, 6));
    EXPECT_TRUE(bit_equal(without.fused, without.spatial));
    const auto with = enhance(q, support, &frames, params);
    EXPECT_EQ(with.spatial.rows(), 5u);
    EXPECT_EQ(with.temporal.rows(), 5u);
    EXPECT_EQ(with.fused.rows(), 5u);
}

}  // namespace
}  // namespace qtoken
