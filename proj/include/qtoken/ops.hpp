// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense kernels shared by the inference path and the gradient tape.
//
// Determinism: every reduction runs sequentially in ascending index order.
// matmul accumulates out[i][j] = ((0 + a[i][0]*b[0][j]) + a[i][1]*b[1][j]) + ...
// which is exactly the naive triple loop; SIMD backends only vectorize across j.

#include <cstddef>
#include <span>
#include <vector>

#include "qtoken/tensor.hpp"

namespace qtoken {

/// Rows whose L2 norm is at or below this are treated as zero embeddings.
inline constexpr double kNormFloor = 1e-12;

template <typename T>
void require_finite(const Tensor<T>& t, const char* what);

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

/// Row-wise softmax of x / tau with the row max subtracted first.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x, T tau);

/// L2 norm of each row, as an m-length vector.
template <typename T>
std::vector<T> row_norms(const Tensor<T>& a);

/// out[i][j] = <a_i, b_j> / (|a_i| |b_j|). Throws degenerate_input on a zero row.
template <typename T>
Tensor<T> cosine_sim(const Tensor<T>& a, const Tensor<T>& b);

/// Indices of the k largest scores, ties to the lower index, returned ascending.
template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> scores, std::size_t k);

/// x * w + bias, with bias (1×q) broadcast over rows.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// m×1 vector of per-row sums.
template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x);

/// 1×n vector of per-column sums.
template <typename T>
Tensor<T> sum_cols(const Tensor<T>& x);

template <typename T>
T sum_all(const Tensor<T>& x);

/// Rows of `x` at `indices`, in the given order.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices);

/// Min-max scaling to [0, 1]; a constant vector maps to all zeros.
template <typename T>
std::vector<T> minmax_normalize(std::span<const T> values);

}  // namespace qtoken
