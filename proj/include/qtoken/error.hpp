// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qtoken {

enum class ErrorKind {
    shape,
    parameter,
    degenerate_input,
    tiling,
    format,
    budget,
    contract,
    io,
    config,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

    /// Same error with "stage '<name>': " prepended to the message.
    Error with_stage(std::string_view stage) const;

private:
    ErrorKind m_kind;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        fail(kind, message);
    }
}

}  // namespace qtoken
