// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/error.hpp"

namespace qtoken {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::shape:
        return "shape error";
    case ErrorKind::parameter:
        return "parameter error";
    case ErrorKind::degenerate_input:
        return "degenerate-input error";
    case ErrorKind::tiling:
        return "tiling error";
    case ErrorKind::format:
        return "format error";
    case ErrorKind::budget:
        return "budget error";
    case ErrorKind::contract:
        return "contract error";
    case ErrorKind::io:
        return "I/O error";
    case ErrorKind::config:
        return "config error";
    }
    return "error";
}

Error Error::with_stage(std::string_view stage) const {
    return Error(m_kind, "stage '" + std::string(stage) + "': " + what());
}

void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, std::string(to_string(kind)) + ": " + message);
}

}  // namespace qtoken
