// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "qtoken/chain.hpp"
#include "qtoken/enhancement.hpp"
#include "qtoken/selection.hpp"
#include "test_util.hpp"

namespace qtoken {
namespace {

TEST(Chain, UngatedForwardMatchesInferencePath) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ChainCase c = random_chain_case(seed);
        c.gated = false;
        Chain<double> chain = build_chain<double>(c);

        SelectionParams<double> params;
        params.tau = c.tau;
        params.alpha = c.alpha;
        params.compress_ratio = c.compress_ratio;
        params.align = Mlp<double>({Linear<double>::dense(c.align_weight, c.align_bias)});
        params.aggregate = Linear<double>::dense(c.aggregate_weight, c.aggregate_bias);
        const auto sel = select_tokens(c.image, c.text, params, c.k);
        EXPECT_EQ(chain.tape.selected(chain.topk), sel.indices);

        EnhancementParams<double> enh;
        enh.fusion = Mlp<double>({Linear<double>::dense(c.fusion_weight, c.fusion_bias)});
        const auto tokens =
            enhance(sel.compressed, c.support, c.temporal.rows() > 0 ? &c.temporal : nullptr, enh);
        EXPECT_LE(testing::max_abs_diff(chain.tape.value(chain.fused), tokens.fused), 1e-12) << seed;
    }
}

TEST(Chain, GradientsDouble) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto check = check_gradients<double>(random_chain_case(seed));
        EXPECT_LE(check.worst, 1e-6) << "seed " << seed;
    }
}

TEST(Chain, GradientsFloat) {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto check = check_gradients<float>(random_chain_case(seed));
        EXPECT_LE(check.worst, 1e-4) << "seed " << seed;
    }
}

TEST(Chain, AlphaGradientNeedsGating) {
    ChainCase c = random_chain_case(7);
    Chain<double> gated = build_chain<double>(c);
    EXPECT_NE(gated.tape.gradient(gated.loss).at("alpha")(0, 0), 0.0);
    c.gated = false;
    Chain<double> plain = build_chain<double>(c);
    EXPECT_EQ(plain.tape.gradient(plain.loss).at("alpha")(0, 0), 0.0);
}

TEST(Chain, RejectsBadBudget) {
    ChainCase c = random_chain_case(3);
    c.k = c.image.rows() + 1;
    EXPECT_THROW((void)build_chain<double>(c), Error);
}

}  // namespace
}  // namespace qtoken
