// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Synthetic scene description: which concepts appear in which patch of which
// camera view and frame, and which concepts the text query mentions.
//
// On disk a scene is YAML:
//
//   tokens_per_patch: 49
//   grid: [4, 7]
//   views: [0, 1, 2, 3, 4, 5]
//   frames: [0, 1]
//   query: [100, 101]
//   default_concepts: [1]          # cells not listed under `cells`
//   cells:
//     - {view: 0, frame: 1, row: 2, col: 3, concepts: [100, 4]}
//
// `view` and `frame` in `cells` are ids from the lists above, not positions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qtoken {

using ConceptId = std::uint64_t;

/// Concept ids at or above this are reserved for derived noise directions.
inline constexpr ConceptId kMaxConceptId = (ConceptId{1} << 62) - 1;

struct SceneSpec {
    std::vector<std::uint32_t> view_ids;
    std::vector<std::uint32_t> frame_ids;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::size_t tokens_per_patch = 49;
    std::vector<ConceptId> query;
    /// Indexed by cell_index(view, frame, row, col).
    std::vector<std::vector<ConceptId>> cells;

    std::size_t view_count() const noexcept { return view_ids.size(); }
    std::size_t frame_count() const noexcept { return frame_ids.size(); }
    std::size_t patch_count() const noexcept { return grid_rows * grid_cols; }

    std::size_t cell_index(std::size_t view, std::size_t frame, std::size_t row, std::size_t col) const noexcept {
        return ((view * frame_count() + frame) * grid_rows + row) * grid_cols + col;
    }
    const std::vector<ConceptId>& concepts(std::size_t view, std::size_t frame, std::size_t row,
                                           std::size_t col) const {
        return cells[cell_index(view, frame, row, col)];
    }
    std::vector<ConceptId>& concepts(std::size_t view, std::size_t frame, std::size_t row, std::size_t col) {
        return cells[cell_index(view, frame, row, col)];
    }

    /// Throws config error on inconsistent dims, duplicate ids, or reserved concept ids.
    void validate() const;

    /// Keeps the first `views` views and the last `frames` frames.
    SceneSpec truncated(std::size_t views, std::size_t frames) const;

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// A patch cell of one view in one frame.
struct CellRef {
    std::size_t view = 0;
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const CellRef&, const CellRef&) = default;
};

/// Cells of `frame` whose concept list shares at least one id with the query.
std::vector<CellRef> query_matching_cells(const SceneSpec& scene, std::size_t frame);

SceneSpec parse_scene(const std::string& yaml_text);
SceneSpec load_scene(const std::filesystem::path& path);
std::string scene_to_yaml(const SceneSpec& scene);
void save_scene(const SceneSpec& scene, const std::filesystem::path& path);

struct DemoSceneOptions {
    std::size_t views = 6;
    std::size_t frames = 1;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 7;
    std::size_t tokens_per_patch = 49;
    /// Cells per view (current frame and history alike) that carry the query concept.
    std::size_t planted_per_view = 3;
    std::uint64_t seed = 0;
};

inline constexpr ConceptId kQueryConcept = 100;
inline constexpr ConceptId kUnmatchedQueryConcept = 101;

/// Driving-scene-like layout: sky on the top row, road on the bottom row,
/// assorted scenery elsewhere, and `planted_per_view` cells per view holding
/// the query concept. Generated from splitmix64 only, so it is portable.
SceneSpec make_demo_scene(const DemoSceneOptions& options);

}  // namespace qtoken
