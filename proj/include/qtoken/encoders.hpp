// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Deterministic stand-ins for the four encoder roles (text, image main
// branch, image support branch, video) plus the patch tiler.
//
// Every embedding is built from `mock_embed`, whose raw coordinates come from
// a fixed splitmix64 hash. All arithmetic runs in double and is cast to the
// requested scalar type at the end, so float and double outputs agree and
// are reproducible on any IEEE-754 platform.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qtoken/scene.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Raw coordinate j of concept c: 2u - 1 in [-1, 1), u = top 53 bits of the hash / 2^53.
double hash_coordinate(std::uint64_t seed, ConceptId concept_id, std::uint64_t j) noexcept;

struct PatchGrid {
    std::size_t image_height = 0;
    std::size_t image_width = 0;
    std::size_t patch_size = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t count() const noexcept { return rows * cols; }
};

/// Throws ErrorKind::tiling unless both image sides are multiples of p.
PatchGrid tile_patches(std::size_t height, std::size_t width, std::size_t patch_size);

/// Position of one main-branch token. Fields are indices into the scene's
/// view/frame lists and the patch grid; comparison is raster order.
struct Provenance {
    std::uint32_t view = 0;
    std::uint32_t frame = 0;
    std::uint32_t patch_row = 0;
    std::uint32_t patch_col = 0;
    std::uint32_t token = 0;

    auto operator<=>(const Provenance&) const = default;
};

template <typename T>
struct TokenBatch {
    Tensor<T> embeddings;
    std::vector<Provenance> provenance;

    std::size_t size() const noexcept { return provenance.size(); }
    /// Throws contract error if provenance is not strictly increasing or mis-sized.
    void validate() const;
};

/// One L2-normalised row per concept id.
template <typename T>
Tensor<T> mock_embed(std::span<const ConceptId> concept_ids, std::size_t dim, std::uint64_t seed);

template <typename T>
Tensor<T> mock_text_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed);

/// tokens_per_patch rows per (view, frame, patch) in raster order. When
/// `frame` is set only that frame index is encoded.
template <typename T>
TokenBatch<T> mock_main_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed,
                                std::optional<std::size_t> frame = std::nullopt);

/// tokens_per_patch pooled rows per view for one frame (default: last).
template <typename T>
Tensor<T> mock_support_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed,
                               std::optional<std::size_t> frame = std::nullopt);

/// Weight of the per-frame direction added to each video row before renormalising.
inline constexpr double kFrameDirectionWeight = 0.25;

/// Unit direction that tags frame index `frame` in video-encoder rows.
template <typename T>
Tensor<T> frame_direction(std::size_t frame, std::size_t dim, std::uint64_t seed);

/// One row per frame: normalize(normalize(mean frame concept) + kFrameDirectionWeight * frame_direction).
template <typename T>
Tensor<T> mock_video_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed);

}  // namespace qtoken
