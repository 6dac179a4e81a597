// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/layers.hpp"

#include <string>

#include "qtoken/ops.hpp"

namespace qtoken {

template <typename T>
Linear<T> Linear<T>::identity(std::size_t dim) {
    require(dim >= 1, ErrorKind::parameter, "identity layer needs dim >= 1");
    return Linear(Kind::identity, dim, dim);
}

template <typename T>
Linear<T> Linear<T>::mean_pool(std::size_t group, std::size_t dim) {
    require(group >= 1 && dim >= 1, ErrorKind::parameter, "mean-pool layer needs group, dim >= 1");
    return Linear(Kind::mean_pool, group * dim, dim);
}

template <typename T>
Linear<T> Linear<T>::dense(Tensor<T> weight, Tensor<T> bias) {
    require(bias.rows() == 1 && bias.cols() == weight.cols(), ErrorKind::shape,
            "dense layer: bias " + bias.shape_string() + " does not match weight " + weight.shape_string());
    Linear out(Kind::dense, weight.rows(), weight.cols());
    out.m_weight = std::move(weight);
    out.m_bias = std::move(bias);
    return out;
}

template <typename T>
Tensor<T> Linear<T>::apply(const Tensor<T>& x) const {
    require(x.cols() == m_in, ErrorKind::shape,
            "linear layer expects " + std::to_string(m_in) + " input features, got " + x.shape_string());
    switch (m_kind) {
    case Kind::identity:
        return x;
    case Kind::mean_pool: {
        // Same per-element operation sequence as x * weight() + 0.
        const std::size_t group = m_in / m_out;
        const T share = T(1) / static_cast<T>(group);
        Tensor<T> out(x.rows(), m_out);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            auto dst = out.row(r);
            const auto src = x.row(r);
            for (std::size_t g = 0; g < group; ++g) {
                for (std::size_t j = 0; j < m_out; ++j) {
                    dst[j] = dst[j] + src[g * m_out + j] * share;
                }
            }
            for (T& v : dst) {
                v = v + T(0);
            }
        }
        return out;
    }
    case Kind::dense:
        return linear(x, m_weight, m_bias);
    }
    return x;
}

template <typename T>
Tensor<T> Linear<T>::weight() const {
    switch (m_kind) {
    case Kind::identity:
        return Tensor<T>::identity(m_in);
    case Kind::mean_pool: {
        Tensor<T> w(m_in, m_out);
        const T share = T(1) / static_cast<T>(m_in / m_out);
        for (std::size_t p = 0; p < m_in; ++p) {
            w(p, p % m_out) = share;
        }
        return w;
    }
    case Kind::dense:
        return m_weight;
    }
    return m_weight;
}

template <typename T>
Tensor<T> Linear<T>::bias() const {
    return m_kind == Kind::dense ? m_bias : Tensor<T>(1, m_out);
}

template <typename T>
Mlp<T>::Mlp(std::vector<Linear<T>> layers) : m_layers(std::move(layers)) {
    for (std::size_t i = 1; i < m_layers.size(); ++i) {
        require(m_layers[i - 1].out_dim() == m_layers[i].in_dim(), ErrorKind::shape,
                "mlp: layer " + std::to_string(i) + " input does not match previous output");
    }
}

template <typename T>
std::size_t Mlp<T>::in_dim() const {
    require(!m_layers.empty(), ErrorKind::contract, "mlp has no layers");
    return m_layers.front().in_dim();
}

template <typename T>
std::size_t Mlp<T>::out_dim() const {
    require(!m_layers.empty(), ErrorKind::contract, "mlp has no layers");
    return m_layers.back().out_dim();
}

template <typename T>
bool Mlp<T>::is_identity() const {
    for (const auto& layer : m_layers) {
        if (layer.kind() != Linear<T>::Kind::identity) {
            return false;
        }
    }
    return true;
}

template <typename T>
Tensor<T> Mlp<T>::apply(const Tensor<T>& x) const {
    require(!m_layers.empty(), ErrorKind::contract, "mlp has no layers");
    Tensor<T> h = m_layers.front().apply(x);
    for (std::size_t i = 1; i < m_layers.size(); ++i) {
        h = m_layers[i].apply(relu(h));
    }
    return h;
}

template class Linear<float>;
template class Linear<double>;
template class Mlp<float>;
template class Mlp<double>;

}  // namespace qtoken
