// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/ops.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"

namespace qtoken {
namespace {

using testing::random_tensor;

template <typename T>
Tensor<T> naive_matmul(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            T acc = T(0);
            for (std::size_t p = 0; p < a.cols(); ++p) {
                acc = acc + a(i, p) * b(p, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

std::vector<std::size_t> sort_oracle_topk(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

TEST(Matmul, IdentityLeftFactor) {
    const TensorD a{{1.5, -2.0}, {0.25, 4.0}};
    EXPECT_EQ(matmul(TensorD::identity(2), a), a);
}

TEST(Matmul, HandArithmetic) {
    const TensorD a{{1, 2}, {3, 4}};
    const TensorD b{{0}, {1}};
    EXPECT_EQ(matmul(a, b), (TensorD{{2}, {4}}));
}

TEST(Matmul, MatchesNaiveTripleLoopExactly) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_tensor<float>(8, 8, rng);
        const auto b = random_tensor<float>(8, 8, rng);
        EXPECT_TRUE(bit_equal(matmul(a, b), naive_matmul(a, b)));
        const auto c = random_tensor<double>(5, 13, rng);
        const auto d = random_tensor<double>(13, 11, rng);
        EXPECT_TRUE(bit_equal(matmul(c, d), naive_matmul(c, d)));
    }
}

TEST(Matmul, DimensionMismatchIsShapeError) {
    try {
        (void)matmul(TensorD(2, 3), TensorD(2, 3));
        FAIL() << "expected a shape error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::shape);
    }
}

TEST(SoftmaxRows, SymmetricRow) {
    const auto out = softmax_rows(TensorD{{0.0, 0.0}}, 1.0);
    EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(out(0, 1), 0.5);
}

TEST(SoftmaxRows, AnalyticRow) {
    const auto out = softmax_rows(TensorD{{std::log(2.0), 0.0}}, 1.0);
    EXPECT_NEAR(out(0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(out(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxRows, LowTemperatureLimit) {
    const auto out = softmax_rows(TensorD{{0.3, 0.9, 0.1}}, 1e-6);
    EXPECT_GT(out(0, 1), 0.999);
}

TEST(SoftmaxRows, NonPositiveTemperatureRejected) {
    EXPECT_THROW((void)softmax_rows(TensorD{{1.0}}, 0.0), Error);
    EXPECT_THROW((void)softmax_rows(TensorD{{1.0}}, -1.0), Error);
}

TEST(SoftmaxRows, RowsSumToOneAcrossTemperatures) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> log_tau(std::log(1e-3), std::log(1e3));
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = random_tensor<double>(4, 9, rng, -5.0, 5.0);
        const double tau = std::exp(log_tau(rng));
        const auto y = softmax_rows(x, tau);
        for (std::size_t i = 0; i < y.rows(); ++i) {
            double total = 0.0;
            for (double v : y.row(i)) {
                total += v;
            }
            EXPECT_NEAR(total, 1.0, 1e-6);
            for (std::size_t j = 0; j + 1 < y.cols(); ++j) {
                // order-preserving within a row
                if (x(i, j) < x(i, j + 1)) {
                    EXPECT_LE(y(i, j), y(i, j + 1));
                }
            }
        }
    }
}

TEST(CosineSim, IdenticalOrthogonalScaled) {
    EXPECT_DOUBLE_EQ(cosine_sim(TensorD{{1, 0}}, TensorD{{1, 0}})(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(cosine_sim(TensorD{{1, 0}}, TensorD{{0, 1}})(0, 0), 0.0);
    EXPECT_NEAR(cosine_sim(TensorD{{3, 4}}, TensorD{{6, 8}})(0, 0), 1.0, 1e-15);
}

TEST(CosineSim, ZeroRowNamesOffendingRow) {
    try {
        (void)cosine_sim(TensorD{{1, 0}, {0, 0}}, TensorD{{1, 1}});
        FAIL() << "expected degenerate-input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
        EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
    }
}

TEST(CosineSim, PositiveRowScalingInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> factor(0.01, 100.0);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_tensor<double>(6, 16, rng);
        const auto b = random_tensor<double>(4, 16, rng);
        const auto before = cosine_sim(a, b);
        const std::size_t row = trial % a.rows();
        const double c = factor(rng);
        for (double& v : a.row(row)) {
            v *= c;
        }
        EXPECT_LE(testing::max_abs_diff(before, cosine_sim(a, b)), 1e-12);
    }
}

TEST(CosineSim, EntriesWithinUnitInterval) {
    std::mt19937_64 rng(9);
    const auto s = cosine_sim(random_tensor<float>(20, 7, rng), random_tensor<float>(9, 7, rng));
    for (float v : s.values()) {
        EXPECT_GE(v, -1.0f);
        EXPECT_LE(v, 1.0f);
    }
}

TEST(TopK, HandRankedAndTieRule) {
    const std::vector<double> s{0.1, 0.9, 0.5};
    EXPECT_EQ(topk_indices<double>(s, 2), (std::vector<std::size_t>{1, 2}));
    const std::vector<double> tie{0.5, 0.5};
    EXPECT_EQ(topk_indices<double>(tie, 1), (std::vector<std::size_t>{0}));
}

TEST(TopK, InvalidKRejected) {
    const std::vector<double> s{0.1, 0.2};
    EXPECT_THROW((void)topk_indices<double>(s, 0), Error);
    EXPECT_THROW((void)topk_indices<double>(s, 3), Error);
}

TEST(TopK, MatchesSortOracle) {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> len(1, 64);
    std::uniform_int_distribution<int> coarse(0, 7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = static_cast<std::size_t>(len(rng));
        std::vector<double> scores(m);
        // coarse values force plenty of ties
        for (double& v : scores) {
            v = trial % 2 == 0 ? coarse(rng) / 4.0 : std::uniform_real_distribution<double>(-1, 1)(rng);
        }
        const std::size_t k = 1 + static_cast<std::size_t>(rng() % m);
        ASSERT_EQ(topk_indices<double>(scores, k), sort_oracle_topk(scores, k)) << "trial " << trial;
    }
}

TEST(Linear, IdentityAndHandArithmetic) {
    const TensorD x{{1.0, -2.0}, {0.5, 3.0}};
    EXPECT_EQ(linear(x, TensorD::identity(2), TensorD(1, 2)), x);
    EXPECT_EQ(linear(TensorD{{1, 1}}, TensorD{{1}, {1}}, TensorD{{0.5}}), (TensorD{{2.5}}));
}

TEST(Linear, ShapeMismatch) {
    EXPECT_THROW((void)linear(TensorD(2, 3), TensorD(2, 2), TensorD(1, 2)), Error);
    EXPECT_THROW((void)linear(TensorD(2, 2), TensorD(2, 2), TensorD(1, 3)), Error);
}

TEST(MinMax, ConstantVectorMapsToZeros) {
    const std::vector<double> c{2.0, 2.0, 2.0};
    EXPECT_EQ(minmax_normalize<double>(c), (std::vector<double>{0, 0, 0}));
    const std::vector<double> v{1.0, 3.0, 2.0};
    EXPECT_EQ(minmax_normalize<double>(v), (std::vector<double>{0.0, 1.0, 0.5}));
}

TEST(Reductions, RowAndColumnSums) {
    const TensorD x{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(sum_rows(x), (TensorD{{6}, {15}}));
    EXPECT_EQ(sum_cols(x), (TensorD{{5, 7, 9}}));
    EXPECT_EQ(sum_all(x), 21.0);
}

}  // namespace
}  // namespace qtoken
