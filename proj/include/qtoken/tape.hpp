// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Small reverse-mode gradient tape over the dense kernels in ops.hpp.
//
// Nodes are appended in evaluation order. Leaves are constants or named
// parameters; every other node stores its op, its inputs and whatever
// attributes it needs, so `replay()` can recompute the graph after a
// parameter has been edited (finite-difference checks do exactly that).
//
// A tape is confined to one thread.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qtoken/tensor.hpp"

namespace qtoken {

enum class Axis { rows, cols, all };

template <typename T>
class Tape {
public:
    struct Var {
        std::size_t id = 0;
    };

    Var constant(Tensor<T> value);
    /// Registers a trainable leaf. Names must be unique within a tape.
    Var parameter(const std::string& name, Tensor<T> value);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var hadamard(Var a, Var b);
    /// factor * a for a constant factor.
    Var scale(Var a, T factor);
    /// mul * a + shift, elementwise, constants only.
    Var affine(Var a, T mul, T shift);
    /// s * a where s is a 1×1 node.
    Var scale_by(Var a, Var s);
    Var softmax_rows(Var x, T tau);
    Var cosine_rows(Var a, Var b);
    Var linear(Var x, Var w, Var bias);
    Var relu(Var x);
    /// Axis::rows sums each row (m×1), Axis::cols each column (1×n), Axis::all gives 1×1.
    Var sum(Var x, Axis axis);
    /// Min-max scaling over all entries; piecewise-linear gradient through argmin/argmax.
    Var minmax(Var x);
    Var reshape(Var x, std::size_t rows, std::size_t cols);
    /// Rows of `x` at the top-k entries of `scores` (ascending index order).
    /// Indices are recomputed on replay and carry no gradient. With `gated`,
    /// row r is additionally multiplied by scores[idx_r], which gives the
    /// scores a differentiable path; without it, scores receive no gradient.
    Var topk_gather(Var x, Var scores, std::size_t k, bool gated);

    const Tensor<T>& value(Var v) const;
    /// Indices chosen by a topk_gather node during the most recent evaluation.
    const std::vector<std::size_t>& selected(Var topk_node) const;

    void set_parameter(const std::string& name, Tensor<T> value);
    const Tensor<T>& parameter_value(const std::string& name) const;
    std::vector<std::string> parameter_names() const;

    /// Recomputes every non-leaf node from the current leaf values.
    void replay();

    /// Reverse pass from a 1×1 node; one gradient per registered parameter.
    std::map<std::string, Tensor<T>> gradient(Var loss);

    std::size_t size() const noexcept { return m_nodes.size(); }

private:
    enum class Op {
        leaf,
        matmul,
        transpose,
        add,
        hadamard,
        scale,
        affine,
        scale_by,
        softmax_rows,
        cosine_rows,
        linear,
        relu,
        sum,
        minmax,
        reshape,
        topk_gather,
    };

    struct Node {
        Op op = Op::leaf;
        std::vector<std::size_t> inputs;
        Tensor<T> value;
        T attr0 = T(0);
        T attr1 = T(0);
        Axis axis = Axis::all;
        std::size_t rows = 0;
        std::size_t cols = 0;
        std::size_t k = 0;
        bool gated = false;
        std::vector<std::size_t> indices;
    };

    Var push(Node node);
    void evaluate(Node& node) const;
    void backprop(const Node& node, const Tensor<T>& grad, std::vector<Tensor<T>>& grads) const;
    const Node& node_at(Var v) const;

    std::vector<Node> m_nodes;
    std::map<std::string, std::size_t> m_parameters;
};

}  // namespace qtoken
