// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "qtoken/tape.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken::testing {

template <typename T>
Tensor<T> random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor<T> t(rows, cols);
    for (T& v : t.values()) {
        v = static_cast<T>(dist(rng));
    }
    return t;
}

/// |a - b| / max(|a|, |b|), norm-wise over all entries.
template <typename A, typename B>
double relative_error(const Tensor<A>& a, const Tensor<B>& b) {
    double diff = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a.data()[i];
        const double y = b.data()[i];
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-30});
    return std::sqrt(diff) / denom;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
    }
    return worst;
}

/// Central differences of a 1×1 tape node with respect to one parameter,
/// replaying the tape for every perturbation. The tape is restored on return.
template <typename T>
Tensor<T> finite_difference(Tape<T>& tape, typename Tape<T>::Var loss, const std::string& name, double h) {
    const Tensor<T> original = tape.parameter_value(name);
    Tensor<T> grad(original.rows(), original.cols());
    for (std::size_t i = 0; i < original.size(); ++i) {
        Tensor<T> bumped = original;
        bumped.data()[i] = static_cast<T>(original.data()[i] + h);
        tape.set_parameter(name, bumped);
        tape.replay();
        const double up = tape.value(loss)(0, 0);
        bumped.data()[i] = static_cast<T>(original.data()[i] - h);
        tape.set_parameter(name, bumped);
        tape.replay();
        const double down = tape.value(loss)(0, 0);
        grad.data()[i] = static_cast<T>((up - down) / (2.0 * h));
    }
    tape.set_parameter(name, original);
    tape.replay();
    return grad;
}

}  // namespace qtoken::testing
