// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qtoken/kernels/simd.hpp"

namespace qtoken::simd::detail {

extern const VectorOps<float> scalar_ops_f32;
extern const VectorOps<double> scalar_ops_f64;

#if defined(QTOKEN_HAVE_AVX2)
extern const VectorOps<float> avx2_ops_f32;
extern const VectorOps<double> avx2_ops_f64;
#endif

#if defined(QTOKEN_HAVE_NEON)
extern const VectorOps<float> neon_ops_f32;
extern const VectorOps<double> neon_ops_f64;
#endif

}  // namespace qtoken::simd::detail
