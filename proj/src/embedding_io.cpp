// Copyright (C) 2026 The qtoken Authors
// SPDX-License-Identifier: Apache-2.0

#include "qtoken/embedding_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "qtoken/error.hpp"

namespace qtoken {

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'V', 'D', 'E'};
constexpr std::uint8_t kDtypeF32 = 0;
constexpr std::uint8_t kNdim = 2;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t offset, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

[[noreturn]] void format_error(std::size_t offset, const std::string& what) {
    fail(ErrorKind::format, "embedding file, offset " + std::to_string(offset) + ": " + what);
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_embeddings(const Tensor<T>& t) {
    std::vector<std::uint8_t> out;
    out.reserve(kEmbeddingHeaderBytes + 4 * t.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kEmbeddingFormatVersion);
    out.push_back(kDtypeF32);
    out.push_back(kNdim);
    put_u64(out, t.rows());
    put_u64(out, t.cols());
    for (T v : t.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

TensorF decode_embeddings(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kEmbeddingHeaderBytes) {
        format_error(bytes.size(), "truncated header (" + std::to_string(bytes.size()) + " of " +
                                       std::to_string(kEmbeddingHeaderBytes) + " bytes)");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        format_error(0, "bad magic, expected \"LVDE\"");
    }
    const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    if (version != kEmbeddingFormatVersion) {
        format_error(4, "unsupported version " + std::to_string(version));
    }
    if (bytes[8] != kDtypeF32) {
        format_error(8, "unsupported dtype " + std::to_string(bytes[8]));
    }
    if (bytes[9] != kNdim) {
        format_error(9, "expected ndim 2, got " + std::to_string(bytes[9]));
    }
    const std::uint64_t rows = get_le(bytes, 10, 8);
    const std::uint64_t cols = get_le(bytes, 18, 8);
    constexpr std::uint64_t max_values = (std::numeric_limits<std::uint64_t>::max() - kEmbeddingHeaderBytes) / 4;
    if (cols != 0 && rows > max_values / cols) {
        format_error(10, "dims " + std::to_string(rows) + "x" + std::to_string(cols) + " overflow");
    }
    const std::uint64_t count = rows * cols;
    const std::uint64_t expected = kEmbeddingHeaderBytes + 4 * count;
    if (bytes.size() < expected) {
        format_error(bytes.size(), "truncated payload, expected " + std::to_string(expected) + " bytes");
    }
    if (bytes.size() > expected) {
        format_error(expected, "trailing bytes after payload");
    }
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, kEmbeddingHeaderBytes + 4 * i, 4)));
    }
    return TensorF(rows, cols, std::move(values));
}

template <typename T>
void save_embeddings(const Tensor<T>& t, const std::filesystem::path& path) {
    const auto bytes = encode_embeddings(t);
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

TensorF load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open embedding file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_embeddings(bytes);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

template std::vector<std::uint8_t> encode_embeddings<float>(const TensorF&);
template std::vector<std::uint8_t> encode_embeddings<double>(const TensorD&);
template void save_embeddings<float>(const TensorF&, const std::filesystem::path&);
template void save_embeddings<double>(const TensorD&, const std::filesystem::path&);

}  // namespace qtoken
