// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace visiontrim {

/// Dense row-major f32 tensor of rank 1 to 3.
///
/// Storage is single precision; every reduction performed on tensor data in
/// this library accumulates in double precision in ascending index order so
/// results are reproducible bit for bit.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor. Throws ValidationError on rank outside [1, 3] or a zero dim.
    explicit Tensor(std::vector<std::size_t> dims);

    /// Takes ownership of `data`; its length must equal the product of `dims`.
    Tensor(std::vector<std::size_t> dims, std::vector<float> data);

    /// Rank-2 tensor from nested rows; all rows must have equal length.
    static Tensor from_rows(const std::vector<std::vector<float>>& rows);

    /// Rank-2 tensor whose rows are the given rows of `source`, in the given order.
    static Tensor gather_rows(const Tensor& source, std::span<const std::size_t> rows);

    std::size_t rank() const noexcept {
        return m_dims.size();
    }
    const std::vector<std::size_t>& dims() const noexcept {
        return m_dims;
    }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept {
        return m_data.size();
    }
    bool empty() const noexcept {
        return m_data.empty();
    }

    std::span<const float> data() const noexcept {
        return m_data;
    }
    std::span<float> data() noexcept {
        return m_data;
    }

    /// Row `i` of a rank-2 tensor.
    std::span<const float> row(std::size_t i) const;
    std::span<float> row(std::size_t i);

    /// Slice `i` along the leading axis of a rank-3 tensor, as a rank-2 tensor.
    Tensor slice(std::size_t i) const;

    float at(std::size_t i, std::size_t j) const;
    float& at(std::size_t i, std::size_t j);

    std::size_t rows() const;
    std::size_t cols() const;

    /// Throws ValidationError naming the first non-finite element.
    void require_finite(const std::string& what = "tensor") const;

    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> m_dims;
    std::vector<float> m_data;
};

/// Numerically stable softmax of each row (max subtraction, double accumulation).
/// Rejects non-finite input with a ValidationError naming the offending index.
Tensor row_softmax(const Tensor& m);

/// Softmax of a double vector in place of the arithmetic above; shared by all
/// score paths so every distribution in the library is normalized the same way.
std::vector<double> softmax(std::span<const double> logits);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean and population variance (divide by N). Two-pass, ascending order.
Moments mean_and_variance(std::span<const double> v);
Moments mean_and_variance(const Tensor& v);

// VTTF: "VTTF" magic, u8 version = 1, u8 dtype = 0 (f32), u8 rank, u8 reserved = 0,
// rank x u64 dims, then the raw f32 payload. Little-endian, no padding, no footer.
inline constexpr std::uint8_t kVttfVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

/// SplitMix64. Fixed forever: fixtures generated from a seed must not change.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_state(seed) {}

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) from the top 53 bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [lo, hi] (inclusive).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Tensor of the given dims with entries uniform in [lo, hi).
    Tensor uniform_tensor(std::vector<std::size_t> dims, double lo = -1.0, double hi = 1.0);

private:
    std::uint64_t m_state;
};

}  // namespace visiontrim
