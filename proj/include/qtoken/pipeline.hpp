// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end run: encode a scene (or load encoder outputs from disk), select
// and compress query-relevant tokens from the current frame of every view,
// enhance them with support-branch and video context, and account for the
// token budget.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qtoken/enhancement.hpp"
#include "qtoken/scene.hpp"
#include "qtoken/selection.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken {

/// Which tokens query the context in the enhancement stage.
enum class QSource { selected, all };

std::string_view to_string(QSource source);
QSource parse_q_source(std::string_view name);

struct PipelineConfig {
    std::size_t dim = 768;
    std::size_t patch_pixels = 224;
    std::size_t grid_rows = 4;
    std::size_t grid_cols = 7;
    std::size_t views = 6;
    std::size_t frames = 4;
    std::size_t tokens_per_patch = 49;
    double select_ratio = 2.0;
    std::size_t compress_ratio = 84;
    double tau = 0.07;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    SoftmaxAxis axis = SoftmaxAxis::image;
    QSource q_source = QSource::selected;
    bool residual = false;
    bool has_class_token = false;
    bool binary_mask = false;

    /// Throws ErrorKind::config.
    void validate() const;
    double declared_reduction() const noexcept { return select_ratio * static_cast<double>(compress_ratio); }
    std::size_t token_count() const noexcept { return views * grid_rows * grid_cols * tokens_per_patch; }

    bool operator==(const PipelineConfig&) const = default;
};

/// Unknown keys and malformed values raise ErrorKind::config.
PipelineConfig parse_config(const std::string& yaml_text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});
std::string config_to_yaml(const PipelineConfig& config);

struct Budget {
    std::size_t k = 0;
    std::size_t out_tokens = 0;
};

/// out_tokens = floor(m / (select_ratio * c)), k = out_tokens * c.
Budget budget(std::size_t m, double select_ratio, std::size_t compress_ratio);

/// Per-token selection flags for the current frame of every view.
struct SelectionMask {
    std::vector<std::uint32_t> view_ids;
    std::uint32_t frame_id = 0;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::size_t tokens_per_patch = 0;
    /// view-major, then patch row, patch col, token.
    std::vector<std::uint8_t> selected;

    std::size_t count() const;
    std::size_t patch_hits(std::size_t view, std::size_t row, std::size_t col) const;
};

/// Marks `indices` (rows of the raster-ordered current-frame token list).
SelectionMask make_mask(std::vector<std::uint32_t> view_ids, std::uint32_t frame_id, std::size_t grid_rows,
                        std::size_t grid_cols, std::size_t tokens_per_patch, std::span<const std::size_t> indices);

/// Side length, in pixels, of one patch block in rendered masks.
inline constexpr std::size_t kMaskCellPixels = 16;

/// Binary PGM bytes for one view.
std::vector<std::uint8_t> mask_to_pgm(const SelectionMask& mask, std::size_t view, bool binary);
std::string mask_filename(const SelectionMask& mask, std::size_t view);
/// Writes one view{v}_frame{f}.pgm per view into `dir`; returns the paths.
std::vector<std::filesystem::path> render_mask(const SelectionMask& mask, const std::filesystem::path& dir,
                                               bool binary = false);

struct PipelineReport {
    std::size_t m_in = 0;
    std::size_t k_selected = 0;
    std::size_t out_tokens = 0;
    std::size_t final_rows = 0;
    double achieved_reduction = 0.0;
    double declared_reduction = 0.0;
    bool temporal_branch = false;
    std::string source;
    std::vector<std::pair<std::string, double>> stage_ms;
    PipelineConfig config;
};

std::string report_to_text(const PipelineReport& report);
std::string report_to_json(const PipelineReport& report);

struct PipelineOutput {
    TensorF final_tokens;
    TensorF text;
    SelectionResult<float> selection;
    EnhancedTokens<float> enhanced;
    SelectionMask mask;
    PipelineReport report;
};

/// Encoder outputs read from embedding files. `video` may be absent.
struct EmbeddingInputs {
    std::filesystem::path image;
    std::filesystem::path text;
    std::filesystem::path support;
    std::optional<std::filesystem::path> video;
};

/// Scene geometry must match the config; the scene is cut to the configured
/// views (first) and frames (last).
PipelineOutput run(const PipelineConfig& config, const SceneSpec& scene);
/// Demo scene generated from the config geometry and seed.
PipelineOutput run(const PipelineConfig& config);
/// Image rows must follow the configured views x grid x tokens layout.
PipelineOutput run(const PipelineConfig& config, const EmbeddingInputs& inputs);

DemoSceneOptions demo_options(const PipelineConfig& config);

/// Overall reduction the ratio-sweep table is built around.
inline constexpr double kReferenceReduction = 168.0;

struct SweepRow {
    double select_ratio = 0.0;
    std::size_t compress_ratio = 0;
    std::size_t m_in = 0;
    std::size_t k = 0;
    std::size_t out_tokens = 0;
    /// select_ratio x compress_ratio.
    double reduction = 0.0;
    /// m_in / out_tokens.
    double achieved_reduction = 0.0;
    /// NaN when the input has no scene to score against.
    double recall = 0.0;
    double wall_ms = 0.0;
    /// reduction differs from the sweep target.
    bool flagged = false;
};

/// Scene input when `scene` is set, otherwise embedding files.
struct SweepInput {
    const SceneSpec* scene = nullptr;
    const EmbeddingInputs* files = nullptr;
};

/// One pipeline run per (select, compress) pair, in order. `on_run` sees every
/// output, e.g. to write per-pair files. Throws config error on an empty list.
std::vector<SweepRow> sweep(const PipelineConfig& base, SweepInput input,
                            const std::vector<std::pair<double, std::size_t>>& pairs,
                            double target = kReferenceReduction,
                            const std::function<void(const SweepRow&, const PipelineOutput&)>& on_run = {});

inline constexpr const char* kSweepCsvHeader = "select_ratio,compress_ratio,m_in,k,out_tokens,reduction,recall,wall_ms";
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Fraction of query-matching patches in the current frame with at least
/// one selected token; 1 when the scene has none.
double planted_recall(const SceneSpec& scene, const SelectionMask& mask);

}  // namespace qtoken
