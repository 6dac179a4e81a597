// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "qtoken/error.hpp"

namespace qtoken {

/// Dense row-major 2-D matrix. Value type; copies are deep.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, T fill = T(0))
        : m_rows(rows), m_cols(cols), m_data(rows * cols, fill) {}

    Tensor(std::size_t rows, std::size_t cols, std::vector<T> data)
        : m_rows(rows), m_cols(cols), m_data(std::move(data)) {
        require(m_data.size() == rows * cols, ErrorKind::shape,
                "data length " + std::to_string(m_data.size()) + " != " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    }

    /// Nested-list constructor: `Tensor<double>{{1, 2}, {3, 4}}`.
    Tensor(std::initializer_list<std::initializer_list<T>> rows) {
        m_rows = rows.size();
        m_cols = m_rows == 0 ? 0 : rows.begin()->size();
        m_data.reserve(m_rows * m_cols);
        for (const auto& r : rows) {
            require(r.size() == m_cols, ErrorKind::shape, "ragged initializer list");
            m_data.insert(m_data.end(), r.begin(), r.end());
        }
    }

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            t(i, i) = T(1);
        }
        return t;
    }

    static Tensor row_vector(std::span<const T> values) {
        return Tensor(1, values.size(), std::vector<T>(values.begin(), values.end()));
    }

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    std::size_t size() const noexcept { return m_data.size(); }
    bool empty() const noexcept { return m_data.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }

    std::span<T> row(std::size_t r) { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const T> row(std::size_t r) const { return {m_data.data() + r * m_cols, m_cols}; }

    std::span<T> values() noexcept { return m_data; }
    std::span<const T> values() const noexcept { return m_data; }
    T* data() noexcept { return m_data.data(); }
    const T* data() const noexcept { return m_data.data(); }

    bool same_shape(const Tensor& other) const noexcept {
        return m_rows == other.m_rows && m_cols == other.m_cols;
    }

    /// Same rows×cols reinterpreted; element order is unchanged.
    Tensor reshaped(std::size_t rows, std::size_t cols) const {
        require(rows * cols == size(), ErrorKind::shape,
                "cannot reshape " + shape_string() + " to " + std::to_string(rows) + "x" + std::to_string(cols));
        return Tensor(rows, cols, m_data);
    }

    bool all_finite() const {
        for (T v : m_data) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    std::string shape_string() const { return std::to_string(m_rows) + "x" + std::to_string(m_cols); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(m_data.size());
        for (std::size_t i = 0; i < m_data.size(); ++i) {
            out[i] = static_cast<U>(m_data[i]);
        }
        return Tensor<U>(m_rows, m_cols, std::move(out));
    }

    /// Bitwise comparison, so -0.0 != 0.0 and identical NaN payloads compare equal.
    friend bool bit_equal(const Tensor& a, const Tensor& b) {
        return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.m_rows == b.m_rows && a.m_cols == b.m_cols && a.m_data == b.m_data;
    }

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<T> m_data;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace qtoken
