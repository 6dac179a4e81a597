// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/encoders.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "qtoken/ops.hpp"
#include "qtoken/scene.hpp"

namespace qtoken {
namespace {

SceneSpec tiny_scene(std::size_t views, std::size_t frames, std::size_t rows, std::size_t cols) {
    DemoSceneOptions opt;
    opt.views = views;
    opt.frames = frames;
    opt.grid_rows = rows;
    opt.grid_cols = cols;
    opt.planted_per_view = std::min<std::size_t>(3, rows > 1 ? (rows - 1) * cols : cols);
    return make_demo_scene(opt);
}

template <typename T>
void expect_unit_rows(const Tensor<T>& t, double tol) {
    for (T n : row_norms(t)) {
        EXPECT_NEAR(static_cast<double>(n), 1.0, tol);
    }
}

TEST(TilePatches, PaperGeometry) {
    const auto grid = tile_patches(896, 1568, 224);
    EXPECT_EQ(grid.rows, 4u);
    EXPECT_EQ(grid.cols, 7u);
    EXPECT_EQ(grid.count(), 28u);
}

TEST(TilePatches, SinglePatchAndDivisibility) {
    const auto grid = tile_patches(224, 224, 224);
    EXPECT_EQ(grid.rows, 1u);
    EXPECT_EQ(grid.cols, 1u);
    try {
        (void)tile_patches(225, 224, 224);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::tiling);
    }
    EXPECT_THROW((void)tile_patches(224, 224, 0), Error);
}

TEST(TilePatches, AreaIdentity) {
    for (std::size_t p : {1u, 7u, 16u, 224u}) {
        for (std::size_t a : {1u, 2u, 5u}) {
            for (std::size_t b : {1u, 3u, 7u}) {
                const auto g = tile_patches(a * p, b * p, p);
                EXPECT_EQ(g.count() * p * p, a * p * b * p);
            }
        }
    }
}

TEST(MockEmbed, GoldenRowSeed42Concept0Dim4) {
    // Frozen from an independent implementation of the splitmix64 hash scheme.
    const ConceptId id = 0;
    const auto row = mock_embed<double>(std::span(&id, 1), 4, 42);
    const double expected[4] = {0.3647804593978688, -0.5286058914544444, 0.5354557075932911, -0.548450739052196};
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_DOUBLE_EQ(row(0, j), expected[j]);
    }
    EXPECT_DOUBLE_EQ(hash_coordinate(42, 0, 0), 0.4831297575436466);
    EXPECT_DOUBLE_EQ(hash_coordinate(42, 0, 3), -0.726389985418362);
}

TEST(MockEmbed, SameConceptSameDirectionAcrossRoles) {
    SceneSpec scene = tiny_scene(1, 1, 1, 1);
    scene.query = {7};
    scene.cells[0] = {7};
    const auto text = mock_text_encoder<double>(scene, 64, 5);
    const ConceptId id = 7;
    const auto image = mock_embed<double>(std::span(&id, 1), 64, 5);
    EXPECT_NEAR(cosine_sim(text, image)(0, 0), 1.0, 1e-15);
}

TEST(MockEmbed, DistinctConceptsNearlyOrthogonal) {
    std::vector<ConceptId> ids(2000);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ids[i] = 1000 + i;
    }
    const auto e = mock_embed<double>(ids, 768, 42);
    double total = 0.0;
    for (std::size_t p = 0; p < 1000; ++p) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 768; ++j) {
            dot += e(2 * p, j) * e(2 * p + 1, j);
        }
        total += std::abs(dot);
    }
    EXPECT_LT(total / 1000.0, 0.2);
}

TEST(MockEmbed, RejectsTinyDim) {
    const ConceptId id = 1;
    EXPECT_THROW((void)mock_embed<float>(std::span(&id, 1), 1, 0), Error);
}

TEST(MockTextEncoder, ShapeUnitRowsDeterminism) {
    SceneSpec scene = tiny_scene(1, 1, 2, 2);
    scene.query = {3, 4, 100};
    const auto a = mock_text_encoder<float>(scene, 32, 9);
    EXPECT_EQ(a.rows(), 3u);
    EXPECT_EQ(a.cols(), 32u);
    expect_unit_rows(a, 1e-6);
    EXPECT_TRUE(bit_equal(a, mock_text_encoder<float>(scene, 32, 9)));
}

TEST(MockTextEncoder, EmptyQueryIsDegenerate) {
    SceneSpec scene = tiny_scene(1, 1, 1, 1);
    scene.query.clear();
    try {
        (void)mock_text_encoder<float>(scene, 8, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
    }
}

TEST(MockTextEncoder, SharedConceptGivesUnitMaxSimilarityAgainstThatConcept) {
    SceneSpec scene = tiny_scene(1, 1, 2, 2);
    scene.query = {kQueryConcept};
    const auto text = mock_text_encoder<double>(scene, 128, 1);
    const ConceptId id = kQueryConcept;
    EXPECT_NEAR(cosine_sim(text, mock_embed<double>(std::span(&id, 1), 128, 1))(0, 0), 1.0, 1e-15);
}

TEST(MockMainEncoder, PaperTokenCount) {
    const SceneSpec scene = tiny_scene(6, 1, 4, 7);
    const auto batch = mock_main_encoder<float>(scene, 16, 0);
    EXPECT_EQ(batch.size(), 8232u);
    EXPECT_EQ(batch.embeddings.rows(), 8232u);
}

TEST(MockMainEncoder, MinimalScene) {
    const auto batch = mock_main_encoder<float>(tiny_scene(1, 1, 1, 1), 16, 0);
    EXPECT_EQ(batch.size(), 49u);
}

TEST(MockMainEncoder, RasterOrderUnitRowsAndDeterminism) {
    const SceneSpec scene = tiny_scene(2, 3, 2, 3);
    const auto a = mock_main_encoder<float>(scene, 24, 77);
    EXPECT_NO_THROW(a.validate());
    EXPECT_EQ(a.size(), 2u * 3 * 6 * 49);
    expect_unit_rows(a.embeddings, 1e-6);
    const auto b = mock_main_encoder<float>(scene, 24, 77);
    EXPECT_TRUE(bit_equal(a.embeddings, b.embeddings));
    EXPECT_EQ(a.provenance, b.provenance);
    const auto one_frame = mock_main_encoder<float>(scene, 24, 77, 1);
    EXPECT_EQ(one_frame.size(), 2u * 6 * 49);
    for (const auto& p : one_frame.provenance) {
        EXPECT_EQ(p.frame, 1u);
    }
}

TEST(MockMainEncoder, FloatAndDoubleAgreeAfterRounding) {
    const SceneSpec scene = tiny_scene(1, 1, 2, 2);
    const auto f = mock_main_encoder<float>(scene, 40, 3);
    const auto d = mock_main_encoder<double>(scene, 40, 3);
    EXPECT_TRUE(bit_equal(f.embeddings, d.embeddings.cast<float>()));
}

TEST(MockMainEncoder, PlantedPatchesHoldTopSimilarityTokens) {
    // 3 planted cells of 28; a brute-force scan over every token must find the
    // most query-similar tokens inside planted cells only.
    DemoSceneOptions opt;
    opt.views = 1;
    opt.seed = 17;
    const SceneSpec scene = make_demo_scene(opt);
    const auto batch = mock_main_encoder<double>(scene, 768, 4);
    const ConceptId car = kQueryConcept;
    const auto query = mock_embed<double>(std::span(&car, 1), 768, 4);
    const auto planted = query_matching_cells(scene, 0);
    ASSERT_EQ(planted.size(), 3u);

    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 768; ++j) {
            dot += batch.embeddings(i, j) * query(0, j);
        }
        sims.emplace_back(dot, i);
    }
    std::sort(sims.rbegin(), sims.rend());
    std::set<std::pair<std::size_t, std::size_t>> planted_cells;
    for (const auto& c : planted) {
        planted_cells.insert({c.row, c.col});
    }
    // Walk down the ranking until the first token outside a planted cell;
    // every planted cell must have shown up before that point.
    std::set<std::pair<std::size_t, std::size_t>> top_cells;
    for (const auto& [sim, row] : sims) {
        const auto& p = batch.provenance[row];
        if (!planted_cells.contains({p.patch_row, p.patch_col})) {
            break;
        }
        top_cells.insert({p.patch_row, p.patch_col});
    }
    EXPECT_EQ(top_cells.size(), 3u);
}

TEST(MockSupportEncoder, RowCounts) {
    EXPECT_EQ(mock_support_encoder<float>(tiny_scene(6, 1, 4, 7), 16, 0).rows(), 294u);
    EXPECT_EQ(mock_support_encoder<float>(tiny_scene(1, 1, 4, 7), 16, 0).rows(), 49u);
}

TEST(MockSupportEncoder, DeterministicUnitRows) {
    const SceneSpec scene = tiny_scene(2, 2, 2, 2);
    const auto a = mock_support_encoder<float>(scene, 64, 11);
    expect_unit_rows(a, 1e-6);
    EXPECT_TRUE(bit_equal(a, mock_support_encoder<float>(scene, 64, 11)));
    EXPECT_THROW((void)mock_support_encoder<float>(scene, 64, 11, 5), Error);
}

TEST(MockVideoEncoder, OneRowPerFrame) {
    EXPECT_EQ(mock_video_encoder<float>(tiny_scene(1, 4, 2, 2), 16, 0).rows(), 4u);
    EXPECT_EQ(mock_video_encoder<float>(tiny_scene(1, 1, 2, 2), 16, 0).rows(), 1u);
    expect_unit_rows(mock_video_encoder<float>(tiny_scene(2, 4, 2, 2), 64, 3), 1e-6);
}

TEST(MockVideoEncoder, IdenticalFramesDifferOnlyByFrameDirection) {
    const SceneSpec scene = tiny_scene(2, 2, 2, 2);  // demo frames share content
    const auto v = mock_video_encoder<double>(scene, 256, 8);
    ASSERT_EQ(v.rows(), 2u);
    EXPECT_FALSE(bit_equal(TensorD::row_vector(v.row(0)), TensorD::row_vector(v.row(1))));

    // row_f = (c + w d_f) / s_f with unit c and d_f. Solve |s_f row_f - w d_f| = 1
    // for s_f and recover c from each frame; both frames must give the same c.
    const double w = kFrameDirectionWeight;
    std::vector<std::vector<double>> content;
    for (std::size_t f = 0; f < 2; ++f) {
        const auto d = frame_direction<double>(f, 256, 8);
        double rd = 0.0;
        for (std::size_t j = 0; j < 256; ++j) {
            rd += v(f, j) * d(0, j);
        }
        const double s = (2.0 * w * rd + std::sqrt(4.0 * w * w * rd * rd + 4.0 * (1.0 - w * w))) / 2.0;
        std::vector<double> c(256);
        for (std::size_t j = 0; j < 256; ++j) {
            c[j] = s * v(f, j) - w * d(0, j);
        }
        content.push_back(c);
    }
    for (std::size_t j = 0; j < 256; ++j) {
        EXPECT_NEAR(content[0][j], content[1][j], 1e-12);
    }
}

TEST(MockVideoEncoder, NoFramesIsDegenerate) {
    SceneSpec scene = tiny_scene(1, 1, 1, 1);
    scene.frame_ids.clear();
    scene.cells.clear();
    try {
        (void)mock_video_encoder<float>(scene, 8, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
    }
}

TEST(TokenBatch, ValidateRejectsOutOfOrderProvenance) {
    TokenBatch<float> batch;
    batch.embeddings = TensorF(2, 2, 1.0f);
    batch.provenance = {{0, 0, 0, 0, 1}, {0, 0, 0, 0, 0}};
    EXPECT_THROW(batch.validate(), Error);
    batch.provenance = {{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}};
    EXPECT_THROW(batch.validate(), Error);
    batch.provenance = {{0, 0, 0, 0, 0}, {0, 0, 0, 1, 0}};
    EXPECT_NO_THROW(batch.validate());
}

}  // namespace
}  // namespace qtoken
