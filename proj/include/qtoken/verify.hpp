// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Invariant suites behind `qtoken verify` and the acceptance binary. Each
// suite is deterministic for a given seed and reports its worst measured
// deviation in `detail`.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qtoken/pipeline.hpp"

namespace qtoken::verify {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Selection indices vs oracle_select on random instances, float and double.
SuiteResult oracle(std::uint64_t seed = 2024, std::size_t instances = 200);
/// Column sums of the normalized similarity and total relevance mass.
SuiteResult stochasticity(std::uint64_t seed = 7, std::size_t matrices = 1000);
/// Convex hull, joint K/V permutation, singleton keys and output shape.
SuiteResult attention(std::uint64_t seed = 11, std::size_t cases = 500);
/// Taped chain vs central differences, 32-bit and 64-bit.
SuiteResult gradients(std::uint64_t seed = 0, std::size_t configs = 20);
/// Two identical runs, and a run per available SIMD backend, compared bitwise.
SuiteResult determinism();
/// Embedding-file golden bytes and demo-scene mask goldens.
SuiteResult goldens(const std::filesystem::path& golden_dir);

/// Config whose masks are frozen in the golden directory.
PipelineConfig golden_mask_config();
/// Regenerates every golden file under `dir`.
std::vector<std::filesystem::path> write_goldens(const std::filesystem::path& dir);

std::vector<std::string> suite_names();
/// Throws ErrorKind::config for an unknown name.
SuiteResult run_suite(const std::string& name, const std::filesystem::path& golden_dir);

}  // namespace qtoken::verify
