// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "qtoken/tensor.hpp"

namespace qtoken {

/// Affine map x -> x W + b. Identity and group-mean maps are kept implicit so
/// untrained defaults cost nothing at d = 768; `weight()` materializes them,
/// and the implicit forms are bit-identical to multiplying by that matrix.
template <typename T>
class Linear {
public:
    enum class Kind { identity, mean_pool, dense };

    static Linear identity(std::size_t dim);
    /// (group * dim) -> dim, averaging `group` consecutive dim-blocks.
    static Linear mean_pool(std::size_t group, std::size_t dim);
    static Linear dense(Tensor<T> weight, Tensor<T> bias);

    Kind kind() const noexcept { return m_kind; }
    std::size_t in_dim() const noexcept { return m_in; }
    std::size_t out_dim() const noexcept { return m_out; }

    Tensor<T> apply(const Tensor<T>& x) const;
    Tensor<T> weight() const;
    Tensor<T> bias() const;

private:
    Linear(Kind kind, std::size_t in, std::size_t out) : m_kind(kind), m_in(in), m_out(out) {}

    Kind m_kind;
    std::size_t m_in;
    std::size_t m_out;
    Tensor<T> m_weight;
    Tensor<T> m_bias;
};

/// Stack of Linear layers with ReLU between consecutive layers (none after the last).
template <typename T>
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<Linear<T>> layers);

    static Mlp identity(std::size_t dim) { return Mlp({Linear<T>::identity(dim)}); }

    const std::vector<Linear<T>>& layers() const noexcept { return m_layers; }
    std::size_t in_dim() const;
    std::size_t out_dim() const;
    bool is_identity() const;

    Tensor<T> apply(const Tensor<T>& x) const;

private:
    std::vector<Linear<T>> m_layers;
};

}  // namespace qtoken
