// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Token-wise cross attention and its spatial/temporal uses. Selected tokens
// query context tokens from the support branch (spatial) and the video
// encoder (temporal); the two results are summed and passed through a
// fusion MLP. Output row count always equals the query row count.

#include <cstddef>
#include <optional>

#include "qtoken/layers.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken {

template <typename T>
struct AttentionParams {
    /// Scaling denominator is sqrt(d_k); 0 means the projected key width.
    std::size_t d_k = 0;
    /// Unset projections are identity.
    std::optional<Linear<T>> q_proj;
    std::optional<Linear<T>> k_proj;
    std::optional<Linear<T>> v_proj;
};

template <typename T>
struct EnhancementParams {
    AttentionParams<T> attention;
    /// Empty means identity.
    Mlp<T> fusion;
    /// Adds the fusion input back onto the MLP output. Off by default.
    bool residual = false;
};

template <typename T>
struct EnhancedTokens {
    Tensor<T> spatial;
    /// Zero-filled when no temporal context is supplied.
    Tensor<T> temporal;
    Tensor<T> fused;
};

/// softmax(Q K^T / sqrt(d_k)) V with optional projections.
template <typename T>
Tensor<T> token_wise_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const AttentionParams<T>& params = {});

template <typename T>
Tensor<T> spatial_restoration(const Tensor<T>& q_tokens, const Tensor<T>& e_spatial,
                              const AttentionParams<T>& params = {});

template <typename T>
Tensor<T> temporal_enhancement(const Tensor<T>& q_tokens, const Tensor<T>& e_temporal,
                               const AttentionParams<T>& params = {});

/// MLP(spatial + temporal); an absent temporal term contributes nothing.
template <typename T>
Tensor<T> fuse(const Tensor<T>& spatial, const Tensor<T>* temporal, const Mlp<T>& fusion, bool residual = false);

template <typename T>
EnhancedTokens<T> enhance(const Tensor<T>& q_tokens, const Tensor<T>& e_spatial, const Tensor<T>* e_temporal,
                          const EnhancementParams<T>& params);

}  // namespace qtoken
