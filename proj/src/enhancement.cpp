// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/enhancement.hpp"

#include <cmath>
#include <string>

#include "qtoken/ops.hpp"

namespace qtoken {

namespace {

template <typename T>
Tensor<T> project(const Tensor<T>& x, const std::optional<Linear<T>>& layer) {
    return layer ? layer->apply(x) : x;
}

}  // namespace

template <typename T>
Tensor<T> token_wise_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const AttentionParams<T>& params) {
    require(k.rows() >= 1, ErrorKind::degenerate_input, "attention: no key/value rows");
    require(k.rows() == v.rows(), ErrorKind::shape,
            "attention: " + std::to_string(k.rows()) + " keys vs " + std::to_string(v.rows()) + " values");
    const Tensor<T> qp = project(q, params.q_proj);
    const Tensor<T> kp = project(k, params.k_proj);
    const Tensor<T> vp = project(v, params.v_proj);
    require(qp.cols() == kp.cols(), ErrorKind::shape,
            "attention: query width " + std::to_string(qp.cols()) + " vs key width " + std::to_string(kp.cols()));
    const std::size_t d_k = params.d_k == 0 ? kp.cols() : params.d_k;
    require(d_k >= 1, ErrorKind::parameter, "attention: d_k must be >= 1");
    const T temperature = std::sqrt(static_cast<T>(d_k));
    return matmul(softmax_rows(matmul(qp, transpose(kp)), temperature), vp);
}

template <typename T>
Tensor<T> spatial_restoration(const Tensor<T>& q_tokens, const Tensor<T>& e_spatial, const AttentionParams<T>& params) {
    return token_wise_attention(q_tokens, e_spatial, e_spatial, params);
}

template <typename T>
Tensor<T> temporal_enhancement(const Tensor<T>& q_tokens, const Tensor<T>& e_temporal,
                               const AttentionParams<T>& params) {
    return token_wise_attention(q_tokens, e_temporal, e_temporal, params);
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& spatial, const Tensor<T>* temporal, const Mlp<T>& fusion, bool residual) {
    Tensor<T> h = spatial;
    if (temporal) {
        require(temporal->same_shape(spatial), ErrorKind::shape,
                "fuse: spatial " + spatial.shape_string() + " vs temporal " + temporal->shape_string());
        h = add(spatial, *temporal);
    }
    Tensor<T> out = fusion.layers().empty() ? h : fusion.apply(h);
    if (residual) {
        require(out.same_shape(h), ErrorKind::shape, "fuse: residual needs a width-preserving fusion MLP");
        out = add(out, h);
    }
    return out;
}

template <typename T>
EnhancedTokens<T> enhance(const Tensor<T>& q_tokens, const Tensor<T>& e_spatial, const Tensor<T>* e_temporal,
                          const EnhancementParams<T>& params) {
    EnhancedTokens<T> out;
    out.spatial = spatial_restoration(q_tokens, e_spatial, params.attention);
    if (e_temporal) {
        out.temporal = temporal_enhancement(q_tokens, *e_temporal, params.attention);
        out.fused = fuse(out.spatial, &out.temporal, params.fusion, params.residual);
    } else {
        out.temporal = Tensor<T>(out.spatial.rows(), out.spatial.cols());
        out.fused = fuse<T>(out.spatial, nullptr, params.fusion, params.residual);
    }
    return out;
}

#define QTOKEN_INSTANTIATE_ENHANCEMENT(T)                                                                 \
    template Tensor<T> token_wise_attention<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                               const AttentionParams<T>&);                                \
    template Tensor<T> spatial_restoration<T>(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&); \
    template Tensor<T> temporal_enhancement<T>(const Tensor<T>&, const Tensor<T>&,                        \
                                               const AttentionParams<T>&);                                \
    template Tensor<T> fuse<T>(const Tensor<T>&, const Tensor<T>*, const Mlp<T>&, bool);                  \
    template EnhancedTokens<T> enhance<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,           \
                                          const EnhancementParams<T>&);

QTOKEN_INSTANTIATE_ENHANCEMENT(float)
QTOKEN_INSTANTIATE_ENHANCEMENT(double)

}  // namespace qtoken
