// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

// Reference backend. The build passes -ffp-contract=off so `y + a * x` stays a
// separate multiply and add, matching the SIMD backends bit for bit.

#include "backends.hpp"

namespace qtoken::simd::detail {

namespace {

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = y[i] + alpha * x[i];
    }
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i] + b[i];
    }
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i] * b[i];
    }
}

template <typename T>
void scale(T alpha, const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = alpha * x[i];
    }
}

}  // namespace

const VectorOps<float> scalar_ops_f32{&axpy<float>, &add<float>, &mul<float>, &scale<float>};
const VectorOps<double> scalar_ops_f64{&axpy<double>, &add<double>, &mul<double>, &scale<double>};

}  // namespace qtoken::simd::detail
