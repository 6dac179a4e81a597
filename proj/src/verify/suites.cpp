// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "qtoken/chain.hpp"
#include "qtoken/embedding_io.hpp"
#include "qtoken/enhancement.hpp"
#include "qtoken/kernels/simd.hpp"
#include "qtoken/ops.hpp"
#include "qtoken/oracle.hpp"

namespace qtoken::verify {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Values of the hand-built 2x3 embedding golden.
const TensorF kGoldenEmbedding{{1.0f, -2.5f, 0.125f}, {3.0e-3f, 65504.0f, -0.0f}};

template <typename F>
SuiteResult timed(const char* name, F&& body) {
    SuiteResult r;
    r.name = name;
    const auto start = Clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

template <typename T>
Tensor<T> uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor<T> t(rows, cols);
    for (T& v : t.values()) {
        v = static_cast<T>(dist(rng));
    }
    return t;
}

std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

template <typename T>
std::size_t oracle_mismatches(std::mt19937_64& rng, std::size_t instances) {
    std::size_t bad = 0;
    const double alphas[] = {0.0, 0.5, 1.0};
    for (std::size_t i = 0; i < instances; ++i) {
        const std::size_t m = 1 + rng() % 64;
        const std::size_t n = 1 + rng() % 16;
        const std::size_t d = 2 + rng() % 31;
        const std::size_t k = 1 + rng() % m;
        SelectionParams<T> params;
        params.tau = static_cast<T>(std::uniform_real_distribution<double>(0.05, 2.0)(rng));
        params.alpha = static_cast<T>(alphas[rng() % 3]);
        params.compress_ratio = 1;
        if (i % 2 == 1) {
            params.align = Mlp<T>({Linear<T>::dense(uniform<T>(d, d, rng), uniform<T>(1, d, rng, -0.1, 0.1))});
        }
        const auto image = uniform<T>(m, d, rng);
        const auto text = uniform<T>(n, d, rng);
        if (select_tokens(image, text, params, k).indices != oracle::oracle_select(image, text, params, k).indices) {
            ++bad;
        }
    }
    return bad;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct RunFingerprint {
    std::vector<std::uint8_t> tokens;
    std::vector<std::vector<std::uint8_t>> masks;
    std::size_t m_in = 0;
    std::size_t k = 0;
    std::size_t out = 0;

    bool operator==(const RunFingerprint&) const = default;
};

RunFingerprint fingerprint(const PipelineConfig& config) {
    const auto out = run(config);
    RunFingerprint f;
    f.tokens = encode_embeddings(out.final_tokens);
    for (std::size_t v = 0; v < out.mask.view_ids.size(); ++v) {
        f.masks.push_back(mask_to_pgm(out.mask, v, config.binary_mask));
    }
    f.m_in = out.report.m_in;
    f.k = out.report.k_selected;
    f.out = out.report.out_tokens;
    return f;
}

}  // namespace

SuiteResult oracle(std::uint64_t seed, std::size_t instances) {
    return timed("oracle", [&](SuiteResult& r) {
        std::mt19937_64 rng(seed);
        const std::size_t bad64 = oracle_mismatches<double>(rng, instances);
        const std::size_t bad32 = oracle_mismatches<float>(rng, instances);
        r.passed = bad64 == 0 && bad32 == 0;
        r.detail = std::to_string(instances) + " instances per precision, mismatches f64=" + std::to_string(bad64) +
                   " f32=" + std::to_string(bad32);
    });
}

SuiteResult stochasticity(std::uint64_t seed, std::size_t matrices) {
    return timed("stochasticity", [&](SuiteResult& r) {
        std::mt19937_64 rng(seed);
        double worst_col = 0.0;
        double worst_mass = 0.0;
        double worst_col_f32 = 0.0;
        for (std::size_t i = 0; i < matrices; ++i) {
            const std::size_t m = 1 + rng() % 64;
            const std::size_t n = 1 + rng() % 16;
            const double tau = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
            const auto s = uniform<double>(m, n, rng);
            const auto p = normalize_similarity(s, tau);
            const auto col_sums = sum_cols(p);
            for (double v : col_sums.values()) {
                worst_col = std::max(worst_col, std::abs(v - 1.0));
            }
            const auto scores = relevance_scores(p);
            const double mass = std::accumulate(scores.begin(), scores.end(), 0.0);
            worst_mass = std::max(worst_mass, std::abs(mass - static_cast<double>(n)));
            const auto p32 = normalize_similarity(s.cast<float>(), static_cast<float>(tau));
            const auto col_sums32 = sum_cols(p32);
            for (float v : col_sums32.values()) {
                worst_col_f32 = std::max(worst_col_f32, std::abs(static_cast<double>(v) - 1.0));
            }
        }
        r.passed = worst_col <= 1e-6 && worst_mass <= 1e-5;
        r.detail = std::to_string(matrices) + " matrices, max |colsum-1|=" + sci(worst_col) +
                   ", max |sum s_sum - n|=" + sci(worst_mass) + " (float32 colsum " + sci(worst_col_f32) + ")";
    });
}

SuiteResult attention(std::uint64_t seed, std::size_t cases) {
    return timed("attention", [&](SuiteResult& r) {
        std::mt19937_64 rng(seed);
        double hull = 0.0;
        double perm = 0.0;
        bool singleton = true;
        bool shapes = true;
        for (std::size_t i = 0; i < cases; ++i) {
            const std::size_t nq = 1 + rng() % 16;
            const std::size_t nk = 1 + rng() % 24;
            const std::size_t d = 1 + rng() % 32;
            const auto q = uniform<float>(nq, d, rng, -2.0, 2.0);
            const auto k = uniform<float>(nk, d, rng, -2.0, 2.0);
            const auto v = uniform<float>(nk, d, rng, -2.0, 2.0);
            const auto out = token_wise_attention(q, k, v);
            shapes = shapes && out.rows() == nq && out.cols() == d;
            for (std::size_t j = 0; j < d; ++j) {
                float lo = v(0, j);
                float hi = v(0, j);
                for (std::size_t t = 1; t < nk; ++t) {
                    lo = std::min(lo, v(t, j));
                    hi = std::max(hi, v(t, j));
                }
                for (std::size_t t = 0; t < nq; ++t) {
                    hull = std::max({hull, static_cast<double>(lo - out(t, j)), static_cast<double>(out(t, j) - hi)});
                }
            }
            std::vector<std::size_t> order(nk);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            const auto shuffled = token_wise_attention(q, gather_rows(k, std::span<const std::size_t>(order)),
                                                       gather_rows(v, std::span<const std::size_t>(order)));
            for (std::size_t e = 0; e < out.size(); ++e) {
                perm = std::max(perm, static_cast<double>(std::abs(out.data()[e] - shuffled.data()[e])));
            }
            const auto one_k = uniform<float>(1, d, rng, -2.0, 2.0);
            const auto one_v = uniform<float>(1, d, rng, -2.0, 2.0);
            const auto single = token_wise_attention(q, one_k, one_v);
            for (std::size_t t = 0; t < nq; ++t) {
                singleton = singleton && std::equal(single.row(t).begin(), single.row(t).end(), one_v.row(0).begin());
            }
        }
        r.passed = hull <= 1e-6 && perm <= 1e-6 && singleton && shapes;
        r.detail = std::to_string(cases) + " cases, hull excess " + sci(hull) + ", permutation " + sci(perm) +
                   ", singleton " + (singleton ? "exact" : "MISMATCH") + ", shapes " + (shapes ? "ok" : "WRONG");
    });
}

SuiteResult gradients(std::uint64_t seed, std::size_t configs) {
    return timed("gradients", [&](SuiteResult& r) {
        double worst64 = 0.0;
        double worst32 = 0.0;
        for (std::size_t i = 0; i < configs; ++i) {
            worst64 = std::max(worst64, check_gradients<double>(random_chain_case(seed + i)).worst);
            worst32 = std::max(worst32, check_gradients<float>(random_chain_case(seed + 1000 + i)).worst);
        }
        r.passed = worst64 <= 1e-6 && worst32 <= 1e-4;
        r.detail = std::to_string(configs) + " configs per precision, worst rel err f64=" + sci(worst64) +
                   " (<= 1e-6), f32=" + sci(worst32) + " (<= 1e-4)";
    });
}

SuiteResult determinism() {
    return timed("determinism", [&](SuiteResult& r) {
        PipelineConfig config;
        config.dim = 128;
        const simd::Isa original = simd::active_isa();
        const RunFingerprint a = fingerprint(config);
        const RunFingerprint b = fingerprint(config);
        bool across = true;
        std::string isas;
        for (simd::Isa isa : simd::available_isas()) {
            simd::set_active_isa(isa);
            across = across && fingerprint(config) == a;
            isas += (isas.empty() ? "" : ",") + std::string(simd::to_string(isa));
        }
        simd::set_active_isa(original);
        r.passed = a == b && across;
        r.detail = std::string("repeat run ") + (a == b ? "identical" : "DIFFERS") + ", backends [" + isas + "] " +
                   (across ? "identical" : "DIFFER");
    });
}

PipelineConfig golden_mask_config() {
    return PipelineConfig{};
}

SuiteResult goldens(const fs::path& golden_dir) {
    return timed("goldens", [&](SuiteResult& r) {
        std::vector<std::string> problems;
        const auto embedding = read_bytes(golden_dir / "embedding_2x3.lvde");
        if (!bit_equal(decode_embeddings(embedding), kGoldenEmbedding) ||
            encode_embeddings(kGoldenEmbedding) != embedding) {
            problems.push_back("embedding_2x3.lvde");
        }
        const auto out = run(golden_mask_config());
        std::size_t masks = 0;
        for (std::size_t v = 0; v < out.mask.view_ids.size(); ++v) {
            const auto name = mask_filename(out.mask, v);
            const auto path = golden_dir / "masks" / name;
            if (!fs::exists(path) || read_bytes(path) != mask_to_pgm(out.mask, v, false)) {
                problems.push_back("masks/" + name);
            }
            ++masks;
        }
        r.passed = problems.empty();
        r.detail = "1 embedding file, " + std::to_string(masks) + " masks";
        for (const auto& p : problems) {
            r.detail += "; mismatch " + p;
        }
    });
}

std::vector<fs::path> write_goldens(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "masks", ec);
    require(!ec, ErrorKind::io, "cannot create " + (dir / "masks").string() + ": " + ec.message());
    std::vector<fs::path> written;
    write_bytes(dir / "embedding_2x3.lvde", encode_embeddings(kGoldenEmbedding));
    written.push_back(dir / "embedding_2x3.lvde");
    const auto out = run(golden_mask_config());
    for (const auto& p : render_mask(out.mask, dir / "masks")) {
        written.push_back(p);
    }
    return written;
}

std::vector<std::string> suite_names() {
    return {"oracle", "stochasticity", "attention", "gradients", "determinism", "goldens"};
}

SuiteResult run_suite(const std::string& name, const fs::path& golden_dir) {
    if (name == "oracle") {
        return oracle();
    }
    if (name == "stochasticity") {
        return stochasticity();
    }
    if (name == "attention") {
        return attention();
    }
    if (name == "gradients") {
        return gradients();
    }
    if (name == "determinism") {
        return determinism();
    }
    if (name == "goldens") {
        return goldens(golden_dir);
    }
    fail(ErrorKind::config, "unknown suite '" + name + "'");
}

}  // namespace qtoken::verify
