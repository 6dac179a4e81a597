// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/selection.hpp"

#include <cmath>
#include <string>

#include "qtoken/ops.hpp"

namespace qtoken {

std::string_view to_string(SoftmaxAxis axis) {
    return axis == SoftmaxAxis::image ? "image" : "text";
}

SoftmaxAxis parse_softmax_axis(std::string_view name) {
    if (name == "image") {
        return SoftmaxAxis::image;
    }
    if (name == "text") {
        return SoftmaxAxis::text;
    }
    fail(ErrorKind::config, "unknown softmax axis '" + std::string(name) + "' (expected image or text)");
}

template <typename T>
void SelectionParams<T>::validate(std::size_t dim) const {
    require(tau > T(0) && std::isfinite(tau), ErrorKind::parameter, "tau must be positive, got " + std::to_string(tau));
    require(alpha >= T(0) && alpha <= T(1), ErrorKind::parameter,
            "alpha must lie in [0, 1], got " + std::to_string(alpha));
    require(select_ratio >= 1.0 && std::isfinite(select_ratio), ErrorKind::parameter,
            "select ratio must be >= 1, got " + std::to_string(select_ratio));
    require(compress_ratio >= 1, ErrorKind::parameter, "compress ratio must be >= 1");
    if (!align.layers().empty()) {
        require(align.in_dim() == dim && align.out_dim() == dim, ErrorKind::shape,
                "alignment MLP must map " + std::to_string(dim) + " -> " + std::to_string(dim));
    }
    if (aggregate) {
        require(aggregate->in_dim() == compress_ratio * dim && aggregate->out_dim() == dim, ErrorKind::shape,
                "aggregation layer must map " + std::to_string(compress_ratio * dim) + " -> " + std::to_string(dim));
    }
}

template <typename T>
Linear<T> SelectionParams<T>::aggregate_layer(std::size_t dim) const {
    return aggregate ? *aggregate : Linear<T>::mean_pool(compress_ratio, dim);
}

template <typename T>
Tensor<T> align(const Tensor<T>& image, const SelectionParams<T>& params) {
    return params.align.layers().empty() ? image : params.align.apply(image);
}

template <typename T>
Tensor<T> normalize_similarity(const Tensor<T>& s, T tau, SoftmaxAxis axis) {
    if (axis == SoftmaxAxis::text) {
        return softmax_rows(s, tau);
    }
    return transpose(softmax_rows(transpose(s), tau));
}

template <typename T>
std::vector<T> relevance_scores(const Tensor<T>& p) {
    const Tensor<T> sums = sum_rows(p);
    return {sums.values().begin(), sums.values().end()};
}

template <typename T>
std::vector<T> token_weights(const Tensor<T>& aligned) {
    const Tensor<T> sums = sum_rows(aligned);
    return {sums.values().begin(), sums.values().end()};
}

template <typename T>
std::vector<T> selection_map(std::span<const T> s_sum, std::span<const T> w, T alpha) {
    require(s_sum.size() == w.size(), ErrorKind::shape,
            "selection map: " + std::to_string(s_sum.size()) + " relevance scores vs " + std::to_string(w.size()) +
                " token weights");
    require(alpha >= T(0) && alpha <= T(1), ErrorKind::parameter,
            "alpha must lie in [0, 1], got " + std::to_string(alpha));
    const auto s_hat = minmax_normalize(s_sum);
    const auto w_hat = minmax_normalize(w);
    std::vector<T> out(s_hat.size());
    const T keep = T(1) - alpha;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = keep * s_hat[i] + alpha * w_hat[i];
    }
    return out;
}

template <typename T>
Tensor<T> select(const Tensor<T>& aligned, std::span<const T> map, std::size_t k,
                 std::vector<std::size_t>* indices_out) {
    require(map.size() == aligned.rows(), ErrorKind::shape,
            "select: map has " + std::to_string(map.size()) + " entries for " + std::to_string(aligned.rows()) +
                " tokens");
    auto indices = topk_indices(map, k);
    Tensor<T> out = gather_rows(aligned, std::span<const std::size_t>(indices));
    if (indices_out) {
        *indices_out = std::move(indices);
    }
    return out;
}

template <typename T>
Tensor<T> compress(const Tensor<T>& topk, std::size_t c, const Linear<T>& aggregate) {
    require(c >= 1, ErrorKind::parameter, "compress ratio must be >= 1");
    require(topk.rows() % c == 0, ErrorKind::contract,
            "compress: " + std::to_string(topk.rows()) + " selected tokens are not a multiple of c = " +
                std::to_string(c));
    return aggregate.apply(topk.reshaped(topk.rows() / c, c * topk.cols()));
}

template <typename T>
SelectionResult<T> select_tokens(const Tensor<T>& image, const Tensor<T>& text, const SelectionParams<T>& params,
                                 std::size_t k) {
    require(image.cols() == text.cols(), ErrorKind::shape,
            "image tokens " + image.shape_string() + " and text tokens " + text.shape_string() + " differ in width");
    require(text.rows() >= 1, ErrorKind::degenerate_input, "query has no text tokens");
    params.validate(image.cols());
    SelectionResult<T> r;
    r.aligned = align(image, params);
    const Tensor<T> p = normalize_similarity(cosine_sim(r.aligned, text), params.tau, params.axis);
    r.s_sum = relevance_scores(p);
    r.w = token_weights(r.aligned);
    r.selection_map = selection_map(std::span<const T>(r.s_sum), std::span<const T>(r.w), params.alpha);
    r.topk = select(r.aligned, std::span<const T>(r.selection_map), k, &r.indices);
    r.compressed = compress(r.topk, params.compress_ratio, params.aggregate_layer(image.cols()));
    return r;
}

#define QTOKEN_INSTANTIATE_SELECTION(T)                                                                  \
    template struct SelectionParams<T>;                                                                  \
    template Tensor<T> align<T>(const Tensor<T>&, const SelectionParams<T>&);                            \
    template Tensor<T> normalize_similarity<T>(const Tensor<T>&, T, SoftmaxAxis);                        \
    template std::vector<T> relevance_scores<T>(const Tensor<T>&);                                       \
    template std::vector<T> token_weights<T>(const Tensor<T>&);                                          \
    template std::vector<T> selection_map<T>(std::span<const T>, std::span<const T>, T);                 \
    template Tensor<T> select<T>(const Tensor<T>&, std::span<const T>, std::size_t,                      \
                                 std::vector<std::size_t>*);                                             \
    template Tensor<T> compress<T>(const Tensor<T>&, std::size_t, const Linear<T>&);                     \
    template SelectionResult<T> select_tokens<T>(const Tensor<T>&, const Tensor<T>&,                     \
                                                 const SelectionParams<T>&, std::size_t);

QTOKEN_INSTANTIATE_SELECTION(float)
QTOKEN_INSTANTIATE_SELECTION(double)

}  // namespace qtoken
