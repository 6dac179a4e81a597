// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>

#include "backends.hpp"
#include "qtoken/error.hpp"

namespace qtoken::simd {

namespace {

bool cpu_has_avx2() {
#if defined(QTOKEN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa best_isa() {
    if (const char* env = std::getenv("QTOKEN_ISA")) {
        if (auto isa = parse_isa(env); isa && isa_available(*isa)) {
            return *isa;
        }
    }
    if (isa_available(Isa::avx2)) {
        return Isa::avx2;
    }
    if (isa_available(Isa::neon)) {
        return Isa::neon;
    }
    return Isa::scalar;
}

std::atomic<Isa>& active_slot() {
    static std::atomic<Isa> slot{best_isa()};
    return slot;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    case Isa::neon:
        return "neon";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
        if (name == to_string(isa)) {
            return isa;
        }
    }
    return std::nullopt;
}

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
        return cpu_has_avx2();
    case Isa::neon:
#if defined(QTOKEN_HAVE_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

Isa detected_isa() {
    return best_isa();
}

Isa active_isa() {
    return active_slot().load(std::memory_order_relaxed);
}

void set_active_isa(Isa isa) {
    require(isa_available(isa), ErrorKind::parameter,
            "SIMD backend '" + std::string(to_string(isa)) + "' is not available on this machine");
    active_slot().store(isa, std::memory_order_relaxed);
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
        if (isa_available(isa)) {
            out.push_back(isa);
        }
    }
    return out;
}

template <>
const VectorOps<float>& ops<float>(Isa isa) {
    switch (isa) {
#if defined(QTOKEN_HAVE_AVX2)
    case Isa::avx2:
        return detail::avx2_ops_f32;
#endif
#if defined(QTOKEN_HAVE_NEON)
    case Isa::neon:
        return detail::neon_ops_f32;
#endif
    default:
        return detail::scalar_ops_f32;
    }
}

template <>
const VectorOps<double>& ops<double>(Isa isa) {
    switch (isa) {
#if defined(QTOKEN_HAVE_AVX2)
    case Isa::avx2:
        return detail::avx2_ops_f64;
#endif
#if defined(QTOKEN_HAVE_NEON)
    case Isa::neon:
        return detail::neon_ops_f64;
#endif
    default:
        return detail::scalar_ops_f64;
    }
}

}  // namespace qtoken::simd
