// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Query-aware token selection: align image tokens, score them against the
// text tokens, blend with a query-independent salience term, keep the top k
// and squeeze every c consecutive survivors into one token.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qtoken/layers.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken {

/// Axis the similarity softmax runs over. `image` normalizes each text
/// token's column over all image tokens; `text` normalizes each image token's
/// row over the text tokens, which makes every relevance score exactly
/// one up to rounding and is kept only for comparison.
enum class SoftmaxAxis { image, text };

std::string_view to_string(SoftmaxAxis axis);
SoftmaxAxis parse_softmax_axis(std::string_view name);

template <typename T>
struct SelectionParams {
    T tau = T(0.07);
    T alpha = T(0);
    double select_ratio = 2.0;
    std::size_t compress_ratio = 84;
    SoftmaxAxis axis = SoftmaxAxis::image;
    /// Empty means identity.
    Mlp<T> align;
    /// Unset means mean pooling over each group of compress_ratio tokens.
    std::optional<Linear<T>> aggregate;

    /// Throws parameter/shape errors; `dim` is the embedding width.
    void validate(std::size_t dim) const;
    Linear<T> aggregate_layer(std::size_t dim) const;
};

template <typename T>
struct SelectionResult {
    std::vector<std::size_t> indices;
    std::vector<T> selection_map;
    std::vector<T> s_sum;
    std::vector<T> w;
    Tensor<T> aligned;
    Tensor<T> topk;
    Tensor<T> compressed;
};

template <typename T>
Tensor<T> align(const Tensor<T>& image, const SelectionParams<T>& params);

/// Softmax of s / tau over the chosen axis of the m×n image-by-text matrix.
template <typename T>
Tensor<T> normalize_similarity(const Tensor<T>& s, T tau, SoftmaxAxis axis = SoftmaxAxis::image);

/// Row sums of the normalized m×n matrix.
template <typename T>
std::vector<T> relevance_scores(const Tensor<T>& p);

/// Per-token sum over feature coordinates.
template <typename T>
std::vector<T> token_weights(const Tensor<T>& aligned);

/// (1 - alpha) * minmax(s_sum) + alpha * minmax(w).
template <typename T>
std::vector<T> selection_map(std::span<const T> s_sum, std::span<const T> w, T alpha);

/// Top-k rows of `aligned` by `map`, kept in ascending index order.
template <typename T>
Tensor<T> select(const Tensor<T>& aligned, std::span<const T> map, std::size_t k,
                 std::vector<std::size_t>* indices_out = nullptr);

/// Groups of c consecutive rows, concatenated and projected c*d -> d.
template <typename T>
Tensor<T> compress(const Tensor<T>& topk, std::size_t c, const Linear<T>& aggregate);

/// Full chain for k kept tokens. `image` is m×d, `text` is n×d.
template <typename T>
SelectionResult<T> select_tokens(const Tensor<T>& image, const Tensor<T>& text, const SelectionParams<T>& params,
                                 std::size_t k);

}  // namespace qtoken
