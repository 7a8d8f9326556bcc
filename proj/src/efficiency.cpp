// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/efficiency.hpp"

#include <cmath>
#include <string>

#include "visiontrim/error.hpp"

namespace visiontrim {

void CostProfile::validate() const {
    if (tokens == 0 || hidden == 0 || ffn == 0 || layers == 0 || kv_bytes_per_element == 0) {
        throw ValidationError("cost profile: tokens, hidden, ffn, layers and bytes per element must be positive");
    }
    if (!(retain_fraction > 0.0 && retain_fraction <= 1.0)) {
        throw ValidationError("retain fraction must lie in (0, 1], got " + std::to_string(retain_fraction));
    }
}

namespace efficiency {

double layer_flops(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t ffn, std::uint64_t layers) {
    const double n = static_cast<double>(tokens);
    const double d = static_cast<double>(hidden);
    const double m = static_cast<double>(ffn);
    return static_cast<double>(layers) * (4.0 * n * d * d + 2.0 * n * n * d + 2.0 * n * d * m);
}

double layer_flops(const CostProfile& profile) {
    profile.validate();
    return layer_flops(profile.tokens, profile.hidden, profile.ffn, profile.layers);
}

double reduction_ratio(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t ffn, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ValidationError("gamma must lie in (0, 1], got " + std::to_string(gamma));
    }
    if (tokens == 0 || hidden == 0 || ffn == 0) {
        throw ValidationError("reduction_ratio: tokens, hidden and ffn must be positive");
    }
    const double n = static_cast<double>(tokens);
    const double d = static_cast<double>(hidden);
    const double m = static_cast<double>(ffn);
    const double kept = gamma * n;
    const double pruned = 8.0 * kept * d * d + 4.0 * kept * kept * d + 6.0 * kept * d * m;
    const double full = 8.0 * n * d * d + 4.0 * n * n * d + 6.0 * n * d * m;
    return 1.0 - pruned / full;
}

double reduction_ratio(const CostProfile& profile) {
    profile.validate();
    return reduction_ratio(profile.tokens, profile.hidden, profile.ffn, profile.retain_fraction);
}

std::uint64_t kv_cache_bytes(std::uint64_t tokens, std::uint64_t hidden, std::uint64_t layers,
                             std::uint64_t bytes_per_element) {
    return 2 * layers * tokens * hidden * bytes_per_element;
}

std::uint64_t kv_cache_bytes(const CostProfile& profile) {
    profile.validate();
    return kv_cache_bytes(profile.tokens, profile.hidden, profile.layers, profile.kv_bytes_per_element);
}

std::uint64_t retained_tokens(std::uint64_t tokens, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ValidationError("gamma must lie in (0, 1], got " + std::to_string(gamma));
    }
    const auto kept = static_cast<std::uint64_t>(std::llround(gamma * static_cast<double>(tokens)));
    return kept == 0 ? 1 : kept;
}

double pipeline_flops(std::uint64_t tokens, std::uint64_t stage1_tokens, std::uint64_t stage2_tokens,
                      std::uint64_t first_layer, std::uint64_t second_layer, std::uint64_t hidden,
                      std::uint64_t ffn, std::uint64_t layers) {
    if (first_layer > second_layer || second_layer > layers) {
        throw ValidationError("pipeline_flops: need first_layer <= second_layer <= layers");
    }
    return layer_flops(tokens, hidden, ffn, first_layer) +
           layer_flops(stage1_tokens, hidden, ffn, second_layer - first_layer) +
           layer_flops(stage2_tokens, hidden, ffn, layers - second_layer);
}

}  // namespace efficiency
}  // namespace visiontrim
