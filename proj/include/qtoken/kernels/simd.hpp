// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Elementwise vector primitives with one scalar reference backend and SIMD
// backends picked at runtime. Every backend computes each output element with
// exactly the same IEEE operations in the same order as the scalar loop (no
// FMA, no horizontal reductions), so all backends are bit-identical.

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

namespace qtoken::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

template <typename T>
struct VectorOps {
    /// y[i] = y[i] + alpha * x[i]
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
    /// out[i] = a[i] + b[i]
    void (*add)(const T* a, const T* b, T* out, std::size_t n);
    /// out[i] = a[i] * b[i]
    void (*mul)(const T* a, const T* b, T* out, std::size_t n);
    /// out[i] = alpha * x[i]
    void (*scale)(T alpha, const T* x, T* out, std::size_t n);
};

/// True when the backend was compiled in and the CPU supports it.
bool isa_available(Isa isa);

/// Best available backend. Honors QTOKEN_ISA=scalar|avx2|neon when set and available.
Isa detected_isa();

Isa active_isa();

/// Process-wide override, mainly for equivalence tests. Throws on unavailable ISA.
void set_active_isa(Isa isa);

std::vector<Isa> available_isas();

template <typename T>
const VectorOps<T>& ops(Isa isa);

template <>
const VectorOps<float>& ops<float>(Isa isa);
template <>
const VectorOps<double>& ops<double>(Isa isa);

template <typename T>
const VectorOps<T>& ops() {
    return ops<T>(active_isa());
}

}  // namespace qtoken::simd
