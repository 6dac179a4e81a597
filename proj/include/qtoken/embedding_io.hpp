// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Embedding file format (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "LVDE"
//   4       4     version u32 = 1
//   8       1     dtype u8 (0 = float32)
//   9       1     ndim u8 = 2
//   10      8     rows u64
//   18      8     cols u64
//   26      4*n   rows*cols float32 values, row-major
//
// Files must end exactly after the payload.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qtoken/tensor.hpp"

namespace qtoken {

inline constexpr std::size_t kEmbeddingHeaderBytes = 26;
inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

/// Values are stored as float32; double tensors are rounded on save.
template <typename T>
std::vector<std::uint8_t> encode_embeddings(const Tensor<T>& t);

TensorF decode_embeddings(std::span<const std::uint8_t> bytes);

template <typename T>
void save_embeddings(const Tensor<T>& t, const std::filesystem::path& path);

TensorF load_embeddings(const std::filesystem::path& path);

}  // namespace qtoken
