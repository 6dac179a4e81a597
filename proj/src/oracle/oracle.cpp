// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qtoken::oracle {

namespace {

template <typename T>
using Matrix = std::vector<std::vector<T>>;

template <typename T>
Matrix<T> to_matrix(const Tensor<T>& t) {
    Matrix<T> out(t.rows(), std::vector<T>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            out[i][j] = t(i, j);
        }
    }
    return out;
}

template <typename T>
Matrix<T> apply_layer(const Matrix<T>& x, const Linear<T>& layer) {
    const Tensor<T> w = layer.weight();
    const Tensor<T> b = layer.bias();
    Matrix<T> out(x.size(), std::vector<T>(w.cols()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            T acc = 0;
            for (std::size_t p = 0; p < w.rows(); ++p) {
                acc += x[i][p] * w(p, j);
            }
            out[i][j] = acc + b(0, j);
        }
    }
    return out;
}

template <typename T>
T norm(const std::vector<T>& v) {
    T acc = 0;
    for (T x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

template <typename T>
std::vector<T> rescale(const std::vector<T>& v) {
    const T lo = *std::min_element(v.begin(), v.end());
    const T hi = *std::max_element(v.begin(), v.end());
    std::vector<T> out(v.size(), T(0));
    if (hi > lo) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            out[i] = (v[i] - lo) / (hi - lo);
        }
    }
    return out;
}

}  // namespace

template <typename T>
OracleSelection<T> oracle_select(const Tensor<T>& image, const Tensor<T>& text, const SelectionParams<T>& params,
                                 std::size_t k) {
    Matrix<T> aligned = to_matrix(image);
    const auto& layers = params.align.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (l > 0) {
            for (auto& row : aligned) {
                for (T& v : row) {
                    v = std::max(v, T(0));
                }
            }
        }
        aligned = apply_layer(aligned, layers[l]);
    }
    const Matrix<T> words = to_matrix(text);
    const std::size_t m = aligned.size();
    const std::size_t n = words.size();

    Matrix<T> sim(m, std::vector<T>(n));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T dot = 0;
            for (std::size_t p = 0; p < aligned[i].size(); ++p) {
                dot += aligned[i][p] * words[j][p];
            }
            sim[i][j] = std::clamp(dot / (norm(aligned[i]) * norm(words[j])), T(-1), T(1));
        }
    }

    // exp(x/tau - max) normalized over the chosen axis
    Matrix<T> prob(m, std::vector<T>(n));
    if (params.axis == SoftmaxAxis::image) {
        for (std::size_t j = 0; j < n; ++j) {
            T top = sim[0][j] / params.tau;
            for (std::size_t i = 1; i < m; ++i) {
                top = std::max(top, sim[i][j] / params.tau);
            }
            T z = 0;
            for (std::size_t i = 0; i < m; ++i) {
                z += std::exp(sim[i][j] / params.tau - top);
            }
            for (std::size_t i = 0; i < m; ++i) {
                prob[i][j] = std::exp(sim[i][j] / params.tau - top) / z;
            }
        }
    } else {
        for (std::size_t i = 0; i < m; ++i) {
            T top = sim[i][0] / params.tau;
            for (std::size_t j = 1; j < n; ++j) {
                top = std::max(top, sim[i][j] / params.tau);
            }
            T z = 0;
            for (std::size_t j = 0; j < n; ++j) {
                z += std::exp(sim[i][j] / params.tau - top);
            }
            for (std::size_t j = 0; j < n; ++j) {
                prob[i][j] = std::exp(sim[i][j] / params.tau - top) / z;
            }
        }
    }

    std::vector<T> s_sum(m, T(0));
    std::vector<T> w(m, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            s_sum[i] += prob[i][j];
        }
        for (T v : aligned[i]) {
            w[i] += v;
        }
    }
    const auto s_hat = rescale(s_sum);
    const auto w_hat = rescale(w);

    OracleSelection<T> out;
    out.selection_map.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.selection_map[i] = (T(1) - params.alpha) * s_hat[i] + params.alpha * w_hat[i];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.selection_map[a] > out.selection_map[b];
    });
    out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, m)));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

template OracleSelection<float> oracle_select<float>(const Tensor<float>&, const Tensor<float>&,
                                                     const SelectionParams<float>&, std::size_t);
template OracleSelection<double> oracle_select<double>(const Tensor<double>&, const Tensor<double>&,
                                                       const SelectionParams<double>&, std::size_t);

}  // namespace qtoken::oracle
