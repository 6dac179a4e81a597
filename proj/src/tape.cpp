// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/tape.hpp"

#include <algorithm>
#include <cmath>

#include "qtoken/ops.hpp"

namespace qtoken {

namespace {

template <typename T>
void accumulate(Tensor<T>& slot, const Tensor<T>& grad) {
    if (grad.empty()) {
        return;
    }
    if (slot.empty()) {
        slot = grad;
        return;
    }
    slot = add(slot, grad);
}

template <typename T>
bool is_scalar(const Tensor<T>& t) {
    return t.rows() == 1 && t.cols() == 1;
}

}  // namespace

template <typename T>
typename Tape<T>::Var Tape<T>::push(Node node) {
    for (std::size_t id : node.inputs) {
        require(id < m_nodes.size(), ErrorKind::contract, "tape: unknown input node " + std::to_string(id));
    }
    evaluate(node);
    m_nodes.push_back(std::move(node));
    return Var{m_nodes.size() - 1};
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node_at(Var v) const {
    require(v.id < m_nodes.size(), ErrorKind::contract, "tape: unknown node " + std::to_string(v.id));
    return m_nodes[v.id];
}

template <typename T>
typename Tape<T>::Var Tape<T>::constant(Tensor<T> value) {
    Node node;
    node.value = std::move(value);
    m_nodes.push_back(std::move(node));
    return Var{m_nodes.size() - 1};
}

template <typename T>
typename Tape<T>::Var Tape<T>::parameter(const std::string& name, Tensor<T> value) {
    require(!m_parameters.contains(name), ErrorKind::contract, "tape: duplicate parameter '" + name + "'");
    Var v = constant(std::move(value));
    m_parameters.emplace(name, v.id);
    return v;
}

template <typename T>
typename Tape<T>::Var Tape<T>::matmul(Var a, Var b) {
    Node n;
    n.op = Op::matmul;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::transpose(Var a) {
    Node n;
    n.op = Op::transpose;
    n.inputs = {a.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
    Node n;
    n.op = Op::add;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::hadamard(Var a, Var b) {
    Node n;
    n.op = Op::hadamard;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::scale(Var a, T factor) {
    Node n;
    n.op = Op::scale;
    n.inputs = {a.id};
    n.attr0 = factor;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::affine(Var a, T mul, T shift) {
    Node n;
    n.op = Op::affine;
    n.inputs = {a.id};
    n.attr0 = mul;
    n.attr1 = shift;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::scale_by(Var a, Var s) {
    Node n;
    n.op = Op::scale_by;
    n.inputs = {a.id, s.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::softmax_rows(Var x, T tau) {
    Node n;
    n.op = Op::softmax_rows;
    n.inputs = {x.id};
    n.attr0 = tau;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::cosine_rows(Var a, Var b) {
    Node n;
    n.op = Op::cosine_rows;
    n.inputs = {a.id, b.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::linear(Var x, Var w, Var bias) {
    Node n;
    n.op = Op::linear;
    n.inputs = {x.id, w.id, bias.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::relu(Var x) {
    Node n;
    n.op = Op::relu;
    n.inputs = {x.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::sum(Var x, Axis axis) {
    Node n;
    n.op = Op::sum;
    n.inputs = {x.id};
    n.axis = axis;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::minmax(Var x) {
    Node n;
    n.op = Op::minmax;
    n.inputs = {x.id};
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::reshape(Var x, std::size_t rows, std::size_t cols) {
    Node n;
    n.op = Op::reshape;
    n.inputs = {x.id};
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::topk_gather(Var x, Var scores, std::size_t k, bool gated) {
    Node n;
    n.op = Op::topk_gather;
    n.inputs = {x.id, scores.id};
    n.k = k;
    n.gated = gated;
    return push(std::move(n));
}

template <typename T>
void Tape<T>::evaluate(Node& node) const {
    auto in = [&](std::size_t i) -> const Tensor<T>& { return m_nodes[node.inputs[i]].value; };
    switch (node.op) {
    case Op::leaf:
        return;
    case Op::matmul:
        node.value = qtoken::matmul(in(0), in(1));
        return;
    case Op::transpose:
        node.value = qtoken::transpose(in(0));
        return;
    case Op::add:
        node.value = qtoken::add(in(0), in(1));
        return;
    case Op::hadamard:
        node.value = qtoken::hadamard(in(0), in(1));
        return;
    case Op::scale:
        node.value = qtoken::scale(in(0), node.attr0);
        return;
    case Op::affine: {
        Tensor<T> out = qtoken::scale(in(0), node.attr0);
        for (T& v : out.values()) {
            v = v + node.attr1;
        }
        node.value = std::move(out);
        return;
    }
    case Op::scale_by:
        require(is_scalar(in(1)), ErrorKind::shape, "tape scale_by: factor must be 1x1");
        node.value = qtoken::scale(in(0), in(1)(0, 0));
        return;
    case Op::softmax_rows:
        node.value = qtoken::softmax_rows(in(0), node.attr0);
        return;
    case Op::cosine_rows:
        node.value = qtoken::cosine_sim(in(0), in(1));
        return;
    case Op::linear:
        node.value = qtoken::linear(in(0), in(1), in(2));
        return;
    case Op::relu:
        node.value = qtoken::relu(in(0));
        return;
    case Op::sum:
        if (node.axis == Axis::rows) {
            node.value = sum_rows(in(0));
        } else if (node.axis == Axis::cols) {
            node.value = sum_cols(in(0));
        } else {
            node.value = Tensor<T>(1, 1, std::vector<T>{sum_all(in(0))});
        }
        return;
    case Op::minmax: {
        const Tensor<T>& x = in(0);
        node.value = Tensor<T>(x.rows(), x.cols(), minmax_normalize<T>(x.values()));
        return;
    }
    case Op::reshape:
        node.value = in(0).reshaped(node.rows, node.cols);
        return;
    case Op::topk_gather: {
        const Tensor<T>& x = in(0);
        const Tensor<T>& scores = in(1);
        require(scores.size() == x.rows(), ErrorKind::shape,
                "tape topk_gather: " + std::to_string(scores.size()) + " scores for " + std::to_string(x.rows()) +
                    " rows");
        node.indices = topk_indices<T>(scores.values(), node.k);
        Tensor<T> out = gather_rows(x, node.indices);
        if (node.gated) {
            for (std::size_t r = 0; r < node.indices.size(); ++r) {
                const T gate = scores.values()[node.indices[r]];
                for (T& v : out.row(r)) {
                    v = gate * v;
                }
            }
        }
        node.value = std::move(out);
        return;
    }
    }
}

template <typename T>
void Tape<T>::backprop(const Node& node, const Tensor<T>& g, std::vector<Tensor<T>>& grads) const {
    auto in = [&](std::size_t i) -> const Tensor<T>& { return m_nodes[node.inputs[i]].value; };
    auto send = [&](std::size_t i, const Tensor<T>& grad) { accumulate(grads[node.inputs[i]], grad); };

    switch (node.op) {
    case Op::leaf:
        return;
    case Op::matmul:
        send(0, qtoken::matmul(g, qtoken::transpose(in(1))));
        send(1, qtoken::matmul(qtoken::transpose(in(0)), g));
        return;
    case Op::transpose:
        send(0, qtoken::transpose(g));
        return;
    case Op::add:
        send(0, g);
        send(1, g);
        return;
    case Op::hadamard:
        send(0, qtoken::hadamard(g, in(1)));
        send(1, qtoken::hadamard(g, in(0)));
        return;
    case Op::scale:
    case Op::affine:
        send(0, qtoken::scale(g, node.attr0));
        return;
    case Op::scale_by: {
        send(0, qtoken::scale(g, in(1)(0, 0)));
        send(1, Tensor<T>(1, 1, std::vector<T>{sum_all(qtoken::hadamard(g, in(0)))}));
        return;
    }
    case Op::softmax_rows: {
        // dx = y * (g - <g, y>) / tau, row by row.
        const Tensor<T>& y = node.value;
        Tensor<T> dx(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
            T dot = T(0);
            for (std::size_t j = 0; j < y.cols(); ++j) {
                dot += g(i, j) * y(i, j);
            }
            for (std::size_t j = 0; j < y.cols(); ++j) {
                dx(i, j) = y(i, j) * (g(i, j) - dot) / node.attr0;
            }
        }
        send(0, dx);
        return;
    }
    case Op::cosine_rows: {
        // C_ij = <a_i, b_j> / (|a_i| |b_j|)
        // dA_i = sum_j G_ij (b_j / (|a_i||b_j|) - C_ij a_i / |a_i|^2), symmetric for B.
        const Tensor<T>& a = in(0);
        const Tensor<T>& b = in(1);
        const Tensor<T>& c = node.value;
        const auto na = row_norms(a);
        const auto nb = row_norms(b);
        Tensor<T> da(a.rows(), a.cols());
        Tensor<T> db(b.rows(), b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < b.rows(); ++j) {
                const T gij = g(i, j);
                if (gij == T(0)) {
                    continue;
                }
                const T inv = T(1) / (na[i] * nb[j]);
                const T ca = c(i, j) / (na[i] * na[i]);
                const T cb = c(i, j) / (nb[j] * nb[j]);
                for (std::size_t p = 0; p < a.cols(); ++p) {
                    da(i, p) += gij * (b(j, p) * inv - ca * a(i, p));
                    db(j, p) += gij * (a(i, p) * inv - cb * b(j, p));
                }
            }
        }
        send(0, da);
        send(1, db);
        return;
    }
    case Op::linear:
        send(0, qtoken::matmul(g, qtoken::transpose(in(1))));
        send(1, qtoken::matmul(qtoken::transpose(in(0)), g));
        send(2, sum_cols(g));
        return;
    case Op::relu: {
        const Tensor<T>& x = in(0);
        Tensor<T> dx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.size(); ++i) {
            dx.data()[i] = x.data()[i] > T(0) ? g.data()[i] : T(0);
        }
        send(0, dx);
        return;
    }
    case Op::sum: {
        const Tensor<T>& x = in(0);
        Tensor<T> dx(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < x.cols(); ++j) {
                dx(i, j) = node.axis == Axis::rows ? g(i, 0) : node.axis == Axis::cols ? g(0, j) : g(0, 0);
            }
        }
        send(0, dx);
        return;
    }
    case Op::minmax: {
        const Tensor<T>& x = in(0);
        Tensor<T> dx(x.rows(), x.cols());
        if (x.empty()) {
            send(0, dx);
            return;
        }
        const auto values = x.values();
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        const T range = *hi_it - *lo_it;
        if (range > T(0)) {
            const auto lo = static_cast<std::size_t>(lo_it - values.begin());
            const auto hi = static_cast<std::size_t>(hi_it - values.begin());
            const auto y = node.value.values();
            T to_lo = T(0);
            T to_hi = T(0);
            for (std::size_t i = 0; i < values.size(); ++i) {
                const T gi = g.data()[i];
                dx.data()[i] += gi / range;
                to_lo += gi * (y[i] - T(1)) / range;
                to_hi -= gi * y[i] / range;
            }
            dx.data()[lo] += to_lo;
            dx.data()[hi] += to_hi;
        }
        send(0, dx);
        return;
    }
    case Op::reshape:
        send(0, g.reshaped(in(0).rows(), in(0).cols()));
        return;
    case Op::topk_gather: {
        const Tensor<T>& x = in(0);
        const Tensor<T>& scores = in(1);
        Tensor<T> dx(x.rows(), x.cols());
        Tensor<T> dscores(scores.rows(), scores.cols());
        for (std::size_t r = 0; r < node.indices.size(); ++r) {
            const std::size_t src = node.indices[r];
            const T gate = node.gated ? scores.values()[src] : T(1);
            T gate_grad = T(0);
            for (std::size_t p = 0; p < x.cols(); ++p) {
                dx(src, p) += gate * g(r, p);
                gate_grad += g(r, p) * x(src, p);
            }
            if (node.gated) {
                dscores.data()[src] += gate_grad;
            }
        }
        send(0, dx);
        send(1, dscores);
        return;
    }
    }
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
    return node_at(v).value;
}

template <typename T>
const std::vector<std::size_t>& Tape<T>::selected(Var topk_node) const {
    const Node& n = node_at(topk_node);
    require(n.op == Op::topk_gather, ErrorKind::contract, "tape: node is not a top-k gather");
    return n.indices;
}

template <typename T>
void Tape<T>::set_parameter(const std::string& name, Tensor<T> value) {
    auto it = m_parameters.find(name);
    require(it != m_parameters.end(), ErrorKind::contract, "tape: unknown parameter '" + name + "'");
    Node& node = m_nodes[it->second];
    require(node.value.same_shape(value), ErrorKind::shape,
            "tape: parameter '" + name + "' is " + node.value.shape_string() + ", got " + value.shape_string());
    node.value = std::move(value);
}

template <typename T>
const Tensor<T>& Tape<T>::parameter_value(const std::string& name) const {
    auto it = m_parameters.find(name);
    require(it != m_parameters.end(), ErrorKind::contract, "tape: unknown parameter '" + name + "'");
    return m_nodes[it->second].value;
}

template <typename T>
std::vector<std::string> Tape<T>::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(m_parameters.size());
    for (const auto& [name, id] : m_parameters) {
        names.push_back(name);
    }
    return names;
}

template <typename T>
void Tape<T>::replay() {
    for (Node& node : m_nodes) {
        evaluate(node);
    }
}

template <typename T>
std::map<std::string, Tensor<T>> Tape<T>::gradient(Var loss) {
    const Node& loss_node = node_at(loss);
    require(is_scalar(loss_node.value), ErrorKind::contract,
            "gradient: loss must be a 1x1 node, got " + loss_node.value.shape_string());

    std::vector<Tensor<T>> grads(m_nodes.size());
    grads[loss.id] = Tensor<T>(1, 1, T(1));
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        if (grads[id].empty()) {
            continue;
        }
        backprop(m_nodes[id], grads[id], grads);
    }

    std::map<std::string, Tensor<T>> out;
    for (const auto& [name, id] : m_parameters) {
        const Tensor<T>& v = m_nodes[id].value;
        out.emplace(name, grads[id].empty() ? Tensor<T>(v.rows(), v.cols()) : grads[id]);
    }
    return out;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace qtoken
