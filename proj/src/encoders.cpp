// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "qtoken/error.hpp"

namespace qtoken {

namespace {

// Derived ids live above kMaxConceptId, so they never collide with scene concepts.
constexpr ConceptId kTokenNoiseTag = ConceptId{1} << 62;
constexpr ConceptId kSupportNoiseTag = ConceptId{2} << 62;
constexpr ConceptId kFrameDirectionTag = ConceptId{3} << 62;
constexpr ConceptId kTagPayloadMask = (ConceptId{1} << 62) - 1;

constexpr double kConceptWeight = 0.8;
constexpr double kNoiseWeight = 0.2;

using Vec = std::vector<double>;

Vec unit_direction(std::uint64_t seed, ConceptId id, std::size_t dim) {
    Vec v(dim);
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        v[j] = hash_coordinate(seed, id, j);
        sq += v[j] * v[j];
    }
    const double norm = std::sqrt(sq);
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

/// Returns false (leaving v untouched) when v is the zero vector.
bool normalize_in_place(Vec& v) {
    double sq = 0.0;
    for (double x : v) {
        sq += x * x;
    }
    if (!(sq > 0.0)) {
        return false;
    }
    const double norm = std::sqrt(sq);
    for (double& x : v) {
        x /= norm;
    }
    return true;
}

Vec blend(const Vec& a, double wa, const Vec& b, double wb) {
    Vec out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        out[j] = wa * a[j] + wb * b[j];
    }
    normalize_in_place(out);
    return out;
}

ConceptId tagged(ConceptId tag, std::uint64_t payload) {
    return tag | (payload & kTagPayloadMask);
}

class DirectionCache {
public:
    DirectionCache(std::uint64_t seed, std::size_t dim) : m_seed(seed), m_dim(dim) {}

    const Vec& get(ConceptId id) {
        auto it = m_cache.find(id);
        if (it == m_cache.end()) {
            it = m_cache.emplace(id, unit_direction(m_seed, id, m_dim)).first;
        }
        return it->second;
    }

private:
    std::uint64_t m_seed;
    std::size_t m_dim;
    std::unordered_map<ConceptId, Vec> m_cache;
};

template <typename T>
void store_row(Tensor<T>& out, std::size_t row, const Vec& v) {
    auto dst = out.row(row);
    for (std::size_t j = 0; j < v.size(); ++j) {
        dst[j] = static_cast<T>(v[j]);
    }
}

void require_dim(std::size_t dim) {
    require(dim >= 2, ErrorKind::parameter, "embedding dim must be >= 2, got " + std::to_string(dim));
}

/// Mean of every concept occurrence in the given cells; zero vector if none.
Vec concept_mean(const SceneSpec& scene, DirectionCache& cache, std::size_t dim, std::size_t view_begin,
                 std::size_t view_end, std::size_t frame) {
    Vec mean(dim, 0.0);
    std::size_t count = 0;
    for (std::size_t v = view_begin; v < view_end; ++v) {
        for (std::size_t r = 0; r < scene.grid_rows; ++r) {
            for (std::size_t c = 0; c < scene.grid_cols; ++c) {
                for (ConceptId id : scene.concepts(v, frame, r, c)) {
                    const Vec& e = cache.get(id);
                    for (std::size_t j = 0; j < dim; ++j) {
                        mean[j] += e[j];
                    }
                    ++count;
                }
            }
        }
    }
    if (count > 0) {
        for (double& x : mean) {
            x /= static_cast<double>(count);
        }
    }
    return mean;
}

std::size_t resolve_frame(const SceneSpec& scene, std::optional<std::size_t> frame) {
    const std::size_t f = frame.value_or(scene.frame_count() - 1);
    require(f < scene.frame_count(), ErrorKind::parameter,
            "frame index " + std::to_string(f) + " outside scene with " + std::to_string(scene.frame_count()) +
                " frames");
    return f;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double hash_coordinate(std::uint64_t seed, ConceptId concept_id, std::uint64_t j) noexcept {
    const std::uint64_t x = splitmix64(seed ^ (concept_id * 0x9E3779B97F4A7C15ULL) ^ (j * 0xBF58476D1CE4E5B9ULL));
    const double u = static_cast<double>(x >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
}

PatchGrid tile_patches(std::size_t height, std::size_t width, std::size_t patch_size) {
    require(height > 0 && width > 0 && patch_size > 0, ErrorKind::tiling,
            "image and patch sizes must be positive");
    require(height % patch_size == 0 && width % patch_size == 0, ErrorKind::tiling,
            std::to_string(height) + "x" + std::to_string(width) + " image is not divisible into " +
                std::to_string(patch_size) + "-pixel patches");
    return PatchGrid{height, width, patch_size, height / patch_size, width / patch_size};
}

template <typename T>
void TokenBatch<T>::validate() const {
    require(embeddings.rows() == provenance.size(), ErrorKind::contract,
            "token batch: " + std::to_string(provenance.size()) + " provenance rows for " +
                std::to_string(embeddings.rows()) + " embeddings");
    for (std::size_t i = 1; i < provenance.size(); ++i) {
        require(provenance[i - 1] < provenance[i], ErrorKind::contract,
                "token batch: provenance not in strict raster order at row " + std::to_string(i));
    }
}

template <typename T>
Tensor<T> mock_embed(std::span<const ConceptId> concept_ids, std::size_t dim, std::uint64_t seed) {
    require_dim(dim);
    Tensor<T> out(concept_ids.size(), dim);
    for (std::size_t i = 0; i < concept_ids.size(); ++i) {
        store_row(out, i, unit_direction(seed, concept_ids[i], dim));
    }
    return out;
}

template <typename T>
Tensor<T> mock_text_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed) {
    require(!scene.query.empty(), ErrorKind::degenerate_input, "text encoder: query has no tokens");
    return mock_embed<T>(scene.query, dim, seed);
}

template <typename T>
TokenBatch<T> mock_main_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed,
                                std::optional<std::size_t> frame) {
    require_dim(dim);
    const std::size_t first_frame = frame ? resolve_frame(scene, frame) : 0;
    const std::size_t last_frame = frame ? first_frame + 1 : scene.frame_count();
    const std::size_t tpp = scene.tokens_per_patch;
    const std::size_t rows = scene.view_count() * (last_frame - first_frame) * scene.patch_count() * tpp;

    TokenBatch<T> batch;
    batch.embeddings = Tensor<T>(rows, dim);
    batch.provenance.reserve(rows);
    DirectionCache cache(seed, dim);

    std::size_t row = 0;
    for (std::size_t v = 0; v < scene.view_count(); ++v) {
        for (std::size_t f = first_frame; f < last_frame; ++f) {
            for (std::size_t r = 0; r < scene.grid_rows; ++r) {
                for (std::size_t c = 0; c < scene.grid_cols; ++c) {
                    const auto& cell = scene.concepts(v, f, r, c);
                    // contiguous runs of q tokens per concept
                    const std::size_t q = (tpp + std::max<std::size_t>(1, cell.size()) - 1) /
                                          std::max<std::size_t>(1, cell.size());
                    for (std::size_t t = 0; t < tpp; ++t) {
                        const std::uint64_t position = (((v * scene.frame_count() + f) * scene.grid_rows + r) *
                                                            scene.grid_cols +
                                                        c) *
                                                           tpp +
                                                       t;
                        const Vec noise = unit_direction(seed, tagged(kTokenNoiseTag, position), dim);
                        if (cell.empty()) {
                            store_row(batch.embeddings, row, noise);
                        } else {
                            const Vec& concept_dir = cache.get(cell[std::min(t / q, cell.size() - 1)]);
                            store_row(batch.embeddings, row, blend(concept_dir, kConceptWeight, noise, kNoiseWeight));
                        }
                        batch.provenance.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(f),
                                                    static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c),
                                                    static_cast<std::uint32_t>(t)});
                        ++row;
                    }
                }
            }
        }
    }
    return batch;
}

template <typename T>
Tensor<T> mock_support_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed,
                               std::optional<std::size_t> frame) {
    require_dim(dim);
    const std::size_t f = resolve_frame(scene, frame);
    const std::size_t tpp = scene.tokens_per_patch;
    Tensor<T> out(scene.view_count() * tpp, dim);
    DirectionCache cache(seed, dim);
    for (std::size_t v = 0; v < scene.view_count(); ++v) {
        Vec pooled = concept_mean(scene, cache, dim, v, v + 1, f);
        const bool has_content = normalize_in_place(pooled);
        for (std::size_t t = 0; t < tpp; ++t) {
            const Vec noise = unit_direction(seed, tagged(kSupportNoiseTag, v * tpp + t), dim);
            store_row(out, v * tpp + t, has_content ? blend(pooled, kConceptWeight, noise, kNoiseWeight) : noise);
        }
    }
    return out;
}

template <typename T>
Tensor<T> frame_direction(std::size_t frame, std::size_t dim, std::uint64_t seed) {
    require_dim(dim);
    Tensor<T> out(1, dim);
    store_row(out, 0, unit_direction(seed, tagged(kFrameDirectionTag, frame), dim));
    return out;
}

template <typename T>
Tensor<T> mock_video_encoder(const SceneSpec& scene, std::size_t dim, std::uint64_t seed) {
    require_dim(dim);
    require(scene.frame_count() >= 1, ErrorKind::degenerate_input, "video encoder: scene has no frames");
    Tensor<T> out(scene.frame_count(), dim);
    DirectionCache cache(seed, dim);
    for (std::size_t f = 0; f < scene.frame_count(); ++f) {
        Vec content = concept_mean(scene, cache, dim, 0, scene.view_count(), f);
        const Vec direction = unit_direction(seed, tagged(kFrameDirectionTag, f), dim);
        if (normalize_in_place(content)) {
            store_row(out, f, blend(content, 1.0, direction, kFrameDirectionWeight));
        } else {
            store_row(out, f, direction);
        }
    }
    return out;
}

#define QTOKEN_INSTANTIATE_ENCODERS(T)                                                                        \
    template struct TokenBatch<T>;                                                                            \
    template Tensor<T> mock_embed<T>(std::span<const ConceptId>, std::size_t, std::uint64_t);                 \
    template Tensor<T> mock_text_encoder<T>(const SceneSpec&, std::size_t, std::uint64_t);                    \
    template TokenBatch<T> mock_main_encoder<T>(const SceneSpec&, std::size_t, std::uint64_t,                 \
                                                std::optional<std::size_t>);                                  \
    template Tensor<T> mock_support_encoder<T>(const SceneSpec&, std::size_t, std::uint64_t,                  \
                                               std::optional<std::size_t>);                                   \
    template Tensor<T> frame_direction<T>(std::size_t, std::size_t, std::uint64_t);                          \
    template Tensor<T> mock_video_encoder<T>(const SceneSpec&, std::size_t, std::uint64_t);

QTOKEN_INSTANTIATE_ENCODERS(float)
QTOKEN_INSTANTIATE_ENCODERS(double)

#undef QTOKEN_INSTANTIATE_ENCODERS

}  // namespace qtoken
