// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force reference for token selection. Plain loops, materialized
// weights and a full sort; shares nothing with the kernel layer so it can
// be used to check it. Test and verification use only.

#include <cstddef>
#include <vector>

#include "qtoken/selection.hpp"
#include "qtoken/tensor.hpp"

namespace qtoken::oracle {

template <typename T>
struct OracleSelection {
    std::vector<std::size_t> indices;
    std::vector<T> selection_map;
};

template <typename T>
OracleSelection<T> oracle_select(const Tensor<T>& image, const Tensor<T>& text, const SelectionParams<T>& params,
                                 std::size_t k);

}  // namespace qtoken::oracle
