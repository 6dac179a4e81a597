// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/chain.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qtoken/ops.hpp"

namespace qtoken {

namespace {

TensorD uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    TensorD t(rows, cols);
    for (double& v : t.values()) {
        v = dist(rng);
    }
    return t;
}

/// Smallest distance between the extreme value and its runner-up, at both ends.
double extreme_gap(std::vector<double> v) {
    if (v.size() < 2) {
        return 1.0;
    }
    std::sort(v.begin(), v.end());
    const double range = v.back() - v.front();
    if (!(range > 0.0)) {
        return 0.0;
    }
    return std::min(v[1] - v[0], v[v.size() - 1] - v[v.size() - 2]) / range;
}

double topk_gap(std::vector<double> v, std::size_t k) {
    if (k >= v.size()) {
        return 1.0;
    }
    std::sort(v.begin(), v.end(), std::greater<>());
    return v[k - 1] - v[k];
}

std::vector<double> as_vector(const TensorD& t) {
    return {t.values().begin(), t.values().end()};
}

bool well_separated(const ChainCase& c, double margin) {
    Chain<double> chain = build_chain<double>(c);
    const TensorD& map = chain.tape.value(chain.selection_map);
    const auto aligned = linear(c.image, c.align_weight, c.align_bias);
    const auto p = normalize_similarity(cosine_sim(aligned, c.text), c.tau, c.axis);
    return topk_gap(as_vector(map), c.k) >= margin && extreme_gap(relevance_scores(p)) >= margin &&
           extreme_gap(token_weights(aligned)) >= margin;
}

}  // namespace

template <typename T>
Chain<T> build_chain(const ChainCase& c) {
    Chain<T> out;
    Tape<T>& t = out.tape;
    const std::size_t m = c.image.rows();
    const std::size_t d = c.image.cols();
    require(c.k >= 1 && c.k <= m && c.k % c.compress_ratio == 0, ErrorKind::contract,
            "chain: k must be a positive multiple of the compress ratio and at most m");

    const auto image = t.constant(c.image.cast<T>());
    const auto text = t.constant(c.text.cast<T>());
    const auto align_w = t.parameter("align.weight", c.align_weight.cast<T>());
    const auto align_b = t.parameter("align.bias", c.align_bias.cast<T>());
    const auto alpha = t.parameter("alpha", TensorD{{c.alpha}}.cast<T>());
    const auto agg_w = t.parameter("aggregate.weight", c.aggregate_weight.cast<T>());
    const auto agg_b = t.parameter("aggregate.bias", c.aggregate_bias.cast<T>());
    const auto fusion_w = t.parameter("fusion.weight", c.fusion_weight.cast<T>());
    const auto fusion_b = t.parameter("fusion.bias", c.fusion_bias.cast<T>());

    const auto aligned = t.linear(image, align_w, align_b);
    typename Tape<T>::Var s_sum;
    if (c.axis == SoftmaxAxis::image) {
        s_sum = t.sum(t.softmax_rows(t.cosine_rows(text, aligned), static_cast<T>(c.tau)), Axis::cols);
    } else {
        s_sum = t.reshape(t.sum(t.softmax_rows(t.cosine_rows(aligned, text), static_cast<T>(c.tau)), Axis::rows), 1, m);
    }
    const auto w = t.reshape(t.sum(aligned, Axis::rows), 1, m);
    const auto keep = t.affine(alpha, T(-1), T(1));
    out.selection_map = t.add(t.scale_by(t.minmax(s_sum), keep), t.scale_by(t.minmax(w), alpha));
    out.topk = t.topk_gather(aligned, out.selection_map, c.k, c.gated);

    const auto grouped = t.reshape(out.topk, c.k / c.compress_ratio, c.compress_ratio * d);
    const auto q = t.linear(grouped, agg_w, agg_b);
    const T temperature = std::sqrt(static_cast<T>(d));
    auto attend = [&](const TensorD& context) {
        const auto kv = t.constant(context.cast<T>());
        return t.matmul(t.softmax_rows(t.matmul(q, t.transpose(kv)), temperature), kv);
    };
    auto h = attend(c.support);
    if (c.temporal.rows() > 0) {
        h = t.add(h, attend(c.temporal));
    }
    out.fused = t.linear(h, fusion_w, fusion_b);
    out.loss = t.sum(t.hadamard(out.fused, t.constant(c.loss_weights.cast<T>())), Axis::all);
    return out;
}

ChainCase random_chain_case(std::uint64_t seed, double margin) {
    std::mt19937_64 rng(seed);
    for (;;) {
        ChainCase c;
        const std::size_t d = 3 + rng() % 4;
        const std::size_t n = 1 + rng() % 4;
        c.compress_ratio = 1 + rng() % 3;
        const std::size_t out_tokens = 1 + rng() % 3;
        c.k = out_tokens * c.compress_ratio;
        const std::size_t m = c.k + 1 + rng() % 12;
        c.image = uniform(m, d, rng, -1.0, 1.0);
        c.text = uniform(n, d, rng, -1.0, 1.0);
        c.support = uniform(1 + rng() % 6, d, rng, -1.0, 1.0);
        const std::size_t frames[] = {0, 1, 3};
        c.temporal = uniform(frames[rng() % 3], d, rng, -1.0, 1.0);
        c.loss_weights = uniform(out_tokens, d, rng, -1.0, 1.0);
        c.align_weight = add(TensorD::identity(d), uniform(d, d, rng, -0.3, 0.3));
        c.align_bias = uniform(1, d, rng, -0.1, 0.1);
        c.alpha = std::uniform_real_distribution<double>(0.2, 0.8)(rng);
        c.aggregate_weight = uniform(c.compress_ratio * d, d, rng, -0.5, 0.5);
        c.aggregate_bias = uniform(1, d, rng, -0.1, 0.1);
        c.fusion_weight = uniform(d, d, rng, -0.5, 0.5);
        c.fusion_bias = uniform(1, d, rng, -0.1, 0.1);
        c.tau = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
        if (well_separated(c, margin)) {
            return c;
        }
    }
}

template <typename T>
GradientCheck check_gradients(const ChainCase& c, double h) {
    Chain<T> chain = build_chain<T>(c);
    const auto grads = chain.tape.gradient(chain.loss);
    Chain<double> reference = build_chain<double>(c);
    GradientCheck result;
    for (const char* name : kChainParameters) {
        const TensorD original = reference.tape.parameter_value(name);
        TensorD numeric(original.rows(), original.cols());
        for (std::size_t i = 0; i < original.size(); ++i) {
            TensorD bumped = original;
            bumped.data()[i] = original.data()[i] + h;
            reference.tape.set_parameter(name, bumped);
            reference.tape.replay();
            const double up = reference.tape.value(reference.loss)(0, 0);
            bumped.data()[i] = original.data()[i] - h;
            reference.tape.set_parameter(name, bumped);
            reference.tape.replay();
            const double down = reference.tape.value(reference.loss)(0, 0);
            numeric.data()[i] = (up - down) / (2.0 * h);
        }
        reference.tape.set_parameter(name, original);
        reference.tape.replay();

        const TensorD analytic = grads.at(name).template cast<double>();
        double diff = 0.0;
        double na = 0.0;
        double nn = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            diff += (analytic.data()[i] - numeric.data()[i]) * (analytic.data()[i] - numeric.data()[i]);
            na += analytic.data()[i] * analytic.data()[i];
            nn += numeric.data()[i] * numeric.data()[i];
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-30});
        const double err = std::sqrt(diff) / denom;
        result.rel_error[name] = err;
        result.worst = std::max(result.worst, err);
    }
    return result;
}

template Chain<float> build_chain<float>(const ChainCase&);
template Chain<double> build_chain<double>(const ChainCase&);
template GradientCheck check_gradients<float>(const ChainCase&, double);
template GradientCheck check_gradients<double>(const ChainCase&, double);

}  // namespace qtoken
