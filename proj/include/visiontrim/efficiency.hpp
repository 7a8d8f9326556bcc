// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

namespace visiontrim {

/// Transformer shape for the analytical cost models.
struct CostProfile {
    std::uint64_t tokens = 0;       // n
    std::uint64_t hidden = 0;       // d
    std::uint64_t ffn = 0;          // m
    std::uint64_t layers = 0;
    std::uint64_t kv_bytes_per_element = 2;  // fp16
    double retain_fraction = 1.0;   // gamma = (K + R) / N

    void validate() const;
};

namespace efficiency {

/// layers * (4 n d^2 + 2 n^2 d + 2 n d m), evaluated in double precision.
double layer_flops(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t ffn, std::uint64_t layers);
double layer_flops(const CostProfile& profile);

/// 1 - (8 g N d^2 + 4 (g N)^2 d + 6 g N d m) / (8 N d^2 + 4 N^2 d + 6 N d m) for g = gamma.
double reduction_ratio(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t ffn, double gamma);
double reduction_ratio(const CostProfile& profile);

/// 2 (K and V) * layers * n * d * bytes_per_element.
std::uint64_t kv_cache_bytes(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t layers,
                             std::uint64_t bytes_per_element = 2);
std::uint64_t kv_cache_bytes(const CostProfile& profile);

inline double to_megabytes(std::uint64_t bytes) {
    return static_cast<double>(bytes) / 1e6;
}
inline double to_mebibytes(std::uint64_t bytes) {
    return static_cast<double>(bytes) / (1024.0 * 1024.0);
}

/// Token count left after applying `gamma` to `tokens`, rounded to nearest, at least 1.
std::uint64_t retained_tokens(std::uint64_t tokens, double gamma);

/// Decoder FLOPs for a two-point schedule: layers [0, first_layer) at the full count,
/// [first_layer, second_layer) at `stage1_tokens`, and the rest at `stage2_tokens`.
/// This extends the per-layer estimate piecewise; it is a modeling choice, not a measurement.
double pipeline_flops(std::uint64_t tokens, std::uint64_t stage1_tokens, std::uint64_t stage2_tokens,
                      std::uint64_t first_layer, std::uint64_t second_layer, std::uint64_t hidden,
                      std::uint64_t ffn, std::uint64_t layers);

}  // namespace efficiency
}  // namespace visiontrim
