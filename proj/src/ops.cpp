// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qtoken/kernels/simd.hpp"

namespace qtoken {

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    require(a.same_shape(b), ErrorKind::shape,
            std::string(op) + ": operand shapes " + a.shape_string() + " and " + b.shape_string() + " differ");
}

}  // namespace

template <typename T>
void require_finite(const Tensor<T>& t, const char* what) {
    const auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::parameter, std::string(what) + " has a non-finite entry at row " +
                                           std::to_string(i / std::max<std::size_t>(t.cols(), 1)));
        }
    }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.cols() == b.rows(), ErrorKind::shape,
            "matmul: inner dimensions differ (" + a.shape_string() + " x " + b.shape_string() + ")");
    require_finite(a, "matmul lhs");
    require_finite(b, "matmul rhs");
    const auto& vops = simd::ops<T>();
    Tensor<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T* out_row = out.row(i).data();
        for (std::size_t p = 0; p < a.cols(); ++p) {
            vops.axpy(a(i, p), b.row(p).data(), out_row, b.cols());
        }
    }
    return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    Tensor<T> out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    Tensor<T> out(a.rows(), a.cols());
    simd::ops<T>().add(a.data(), b.data(), out.data(), a.size());
    return out;
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "hadamard");
    Tensor<T> out(a.rows(), a.cols());
    simd::ops<T>().mul(a.data(), b.data(), out.data(), a.size());
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    Tensor<T> out(a.rows(), a.cols());
    simd::ops<T>().scale(factor, a.data(), out.data(), a.size());
    return out;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x, T tau) {
    require(tau > T(0) && std::isfinite(tau), ErrorKind::parameter,
            "softmax temperature must be positive, got " + std::to_string(tau));
    require_finite(x, "softmax input");
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto in = x.row(i);
        auto dst = out.row(i);
        if (in.empty()) {
            continue;
        }
        T row_max = in[0] / tau;
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] = in[j] / tau;
            row_max = std::max(row_max, dst[j]);
        }
        T total = T(0);
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] = std::exp(dst[j] - row_max);
            total += dst[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) {
            dst[j] /= total;
        }
    }
    return out;
}

template <typename T>
std::vector<T> row_norms(const Tensor<T>& a) {
    std::vector<T> norms(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        T acc = T(0);
        for (T v : a.row(i)) {
            acc += v * v;
        }
        norms[i] = std::sqrt(acc);
    }
    return norms;
}

template <typename T>
Tensor<T> cosine_sim(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.cols() == b.cols(), ErrorKind::shape,
            "cosine_sim: embedding dims differ (" + a.shape_string() + " vs " + b.shape_string() + ")");
    const auto a_norms = row_norms(a);
    const auto b_norms = row_norms(b);
    for (std::size_t i = 0; i < a_norms.size(); ++i) {
        require(a_norms[i] > T(kNormFloor), ErrorKind::degenerate_input,
                "cosine_sim: row " + std::to_string(i) + " of the left operand is a zero vector");
    }
    for (std::size_t j = 0; j < b_norms.size(); ++j) {
        require(b_norms[j] > T(kNormFloor), ErrorKind::degenerate_input,
                "cosine_sim: row " + std::to_string(j) + " of the right operand is a zero vector");
    }
    Tensor<T> out = matmul(a, transpose(b));
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            T c = out(i, j) / (a_norms[i] * b_norms[j]);
            out(i, j) = std::clamp(c, T(-1), T(1));
        }
    }
    return out;
}

template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> scores, std::size_t k) {
    require(k >= 1 && k <= scores.size(), ErrorKind::parameter,
            "top-k: k = " + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        require(std::isfinite(scores[i]), ErrorKind::parameter,
                "top-k: score " + std::to_string(i) + " is not finite");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t lhs, std::size_t rhs) {
        return scores[lhs] > scores[rhs] || (scores[lhs] == scores[rhs] && lhs < rhs);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), better);
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    require(bias.rows() == 1 && bias.cols() == w.cols(), ErrorKind::shape,
            "linear: bias " + bias.shape_string() + " does not match weight " + w.shape_string());
    require(x.cols() == w.rows(), ErrorKind::shape,
            "linear: input " + x.shape_string() + " does not match weight " + w.shape_string());
    Tensor<T> out = matmul(x, w);
    const auto& vops = simd::ops<T>();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        vops.add(out.row(i).data(), bias.data(), out.row(i).data(), out.cols());
    }
    return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.data()[i] = std::max(x.data()[i], T(0));
    }
    return out;
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
    Tensor<T> out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        T acc = T(0);
        for (T v : x.row(i)) {
            acc += v;
        }
        out(i, 0) = acc;
    }
    return out;
}

template <typename T>
Tensor<T> sum_cols(const Tensor<T>& x) {
    Tensor<T> out(1, x.cols());
    const auto& vops = simd::ops<T>();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        vops.add(out.data(), x.row(i).data(), out.data(), x.cols());
    }
    return out;
}

template <typename T>
T sum_all(const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.values()) {
        acc += v;
    }
    return acc;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> indices) {
    Tensor<T> out(indices.size(), x.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        require(indices[r] < x.rows(), ErrorKind::parameter,
                "gather: index " + std::to_string(indices[r]) + " out of range for " + x.shape_string());
        std::copy(x.row(indices[r]).begin(), x.row(indices[r]).end(), out.row(r).begin());
    }
    return out;
}

template <typename T>
std::vector<T> minmax_normalize(std::span<const T> values) {
    std::vector<T> out(values.size(), T(0));
    if (values.empty()) {
        return out;
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const T lo = *lo_it;
    const T range = *hi_it - lo;
    if (!(range > T(0))) {
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - lo) / range;
    }
    return out;
}

#define QTOKEN_INSTANTIATE_OPS(T)                                                                  \
    template void require_finite<T>(const Tensor<T>&, const char*);                                \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                              \
    template Tensor<T> transpose<T>(const Tensor<T>&);                                             \
    template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                 \
    template Tensor<T> hadamard<T>(const Tensor<T>&, const Tensor<T>&);                            \
    template Tensor<T> scale<T>(const Tensor<T>&, T);                                              \
    template Tensor<T> softmax_rows<T>(const Tensor<T>&, T);                                       \
    template std::vector<T> row_norms<T>(const Tensor<T>&);                                        \
    template Tensor<T> cosine_sim<T>(const Tensor<T>&, const Tensor<T>&);                          \
    template std::vector<std::size_t> topk_indices<T>(std::span<const T>, std::size_t);            \
    template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                  \
    template Tensor<T> sum_rows<T>(const Tensor<T>&);                                              \
    template Tensor<T> sum_cols<T>(const Tensor<T>&);                                              \
    template T sum_all<T>(const Tensor<T>&);                                                       \
    template Tensor<T> gather_rows<T>(const Tensor<T>&, std::span<const std::size_t>);             \
    template std::vector<T> minmax_normalize<T>(std::span<const T>);

QTOKEN_INSTANTIATE_OPS(float)
QTOKEN_INSTANTIATE_OPS(double)

#undef QTOKEN_INSTANTIATE_OPS

}  // namespace qtoken
