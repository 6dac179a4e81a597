// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// The selection + enhancement forward pass recorded on a gradient tape, so
// the trainable pieces (alignment layer, alpha, aggregation layer, fusion
// layer) can be differentiated end to end and checked against finite
// differences.
//
// Top-k is piecewise constant in its inputs. With `gated` set, each kept row
// is scaled by its selection-map value, which gives alpha and the map a
// smooth path to the loss; without it alpha's gradient is identically zero.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "qtoken/selection.hpp"
#include "qtoken/tape.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken {

/// One problem instance, stored in double and cast on build.
struct ChainCase {
    TensorD image;
    TensorD text;
    TensorD support;
    /// Zero rows means no temporal branch.
    TensorD temporal;
    TensorD loss_weights;

    TensorD align_weight;
    TensorD align_bias;
    double alpha = 0.5;
    TensorD aggregate_weight;
    TensorD aggregate_bias;
    TensorD fusion_weight;
    TensorD fusion_bias;

    double tau = 0.07;
    std::size_t k = 1;
    std::size_t compress_ratio = 1;
    SoftmaxAxis axis = SoftmaxAxis::image;
    bool gated = true;
};

template <typename T>
struct Chain {
    Tape<T> tape;
    typename Tape<T>::Var selection_map;
    typename Tape<T>::Var topk;
    typename Tape<T>::Var fused;
    typename Tape<T>::Var loss;
};

/// Parameter names registered on every chain tape.
inline constexpr const char* kChainParameters[] = {
    "align.weight", "align.bias", "alpha", "aggregate.weight", "aggregate.bias", "fusion.weight", "fusion.bias",
};

template <typename T>
Chain<T> build_chain(const ChainCase& c);

/// Small random instance whose top-k boundary and min/max positions are
/// separated by at least `margin`, so finite-difference steps far below it
/// cannot flip a discrete choice.
ChainCase random_chain_case(std::uint64_t seed, double margin = 1e-3);

struct GradientCheck {
    /// Norm-wise relative error per parameter.
    std::map<std::string, double> rel_error;
    double worst = 0.0;
};

/// Tape gradients at precision T against central differences of the same
/// function evaluated in double with step h.
template <typename T>
GradientCheck check_gradients(const ChainCase& c, double h = 1e-5);

}  // namespace qtoken
