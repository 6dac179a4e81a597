// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

// AArch64 only. vmulq + vaddq rather than vfmaq to keep scalar rounding.

#include <arm_neon.h>

#include "backends.hpp"

namespace qtoken::simd::detail {

namespace {

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
    const float32x4_t va = vdupq_n_f32(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
    }
    for (; i < n; ++i) {
        y[i] = y[i] + alpha * x[i];
    }
}

void add_f32(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    }
    for (; i < n; ++i) {
        out[i] = a[i] + b[i];
    }
}

void mul_f32(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    }
    for (; i < n; ++i) {
        out[i] = a[i] * b[i];
    }
}

void scale_f32(float alpha, const float* x, float* out, std::size_t n) {
    const float32x4_t va = vdupq_n_f32(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(out + i, vmulq_f32(va, vld1q_f32(x + i)));
    }
    for (; i < n; ++i) {
        out[i] = alpha * x[i];
    }
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) {
        y[i] = y[i] + alpha * x[i];
    }
}

void add_f64(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) {
        out[i] = a[i] + b[i];
    }
}

void mul_f64(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) {
        out[i] = a[i] * b[i];
    }
}

void scale_f64(double alpha, const double* x, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        out[i] = alpha * x[i];
    }
}

}  // namespace

const VectorOps<float> neon_ops_f32{&axpy_f32, &add_f32, &mul_f32, &scale_f32};
const VectorOps<double> neon_ops_f64{&axpy_f64, &add_f64, &mul_f64, &scale_f64};

}  // namespace qtoken::simd::detail
