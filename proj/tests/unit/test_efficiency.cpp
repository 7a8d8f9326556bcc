// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "visiontrim/efficiency.hpp"
#include "visiontrim/error.hpp"

using namespace visiontrim;

TEST_CASE("layer flops") {
    CHECK(efficiency::layer_flops(1, 1, 1, 1) == 8.0);
    const double big = efficiency::layer_flops(576, 4096, 11008, 32);
    CHECK(big == 2986076012544.0);
    CHECK(std::abs(big / 2.99e12 - 1.0) < 5e-3);
    CHECK(big == static_cast<double>(oracle::exact_layer_flops(576, 4096, 11008, 32)));
    CHECK(efficiency::layer_flops(1152, 4096, 11008, 32) == 6146098200576.0);
}

TEST_CASE("layer flops is quadratic in n with second difference 4 L d") {
    for (std::uint64_t n = 1; n < 50; n += 7) {
        const double a = efficiency::layer_flops(n, 64, 256, 3);
        const double b = efficiency::layer_flops(n + 1, 64, 256, 3);
        const double c = efficiency::layer_flops(n + 2, 64, 256, 3);
        CHECK(c - 2 * b + a == 4.0 * 3 * 64);
    }
    CHECK(efficiency::layer_flops(10, 8, 16, 6) == 3 * efficiency::layer_flops(10, 8, 16, 2));
}

TEST_CASE("reduction ratio") {
    CHECK(efficiency::reduction_ratio(576, 4096, 11008, 1.0) == 0.0);
    const double f = efficiency::reduction_ratio(2880, 4096, 11008, 320.0 / 2880.0);
    CHECK(std::abs(f - 0.899) < 0.002);
    CHECK(std::abs(f - 0.8992008249548853) < 1e-12);
    CHECK(std::abs(f - static_cast<double>(oracle::exact_reduction_ratio(2880, 320, 4096, 11008))) < 1e-12);

    const double half = efficiency::reduction_ratio(576, 4096, 11008, 0.5);
    const double quarter = efficiency::reduction_ratio(576, 4096, 11008, 0.25);
    const double tenth = efficiency::reduction_ratio(576, 4096, 11008, 0.1);
    CHECK(half < quarter);
    CHECK(quarter < tenth);
    CHECK(tenth < 1.0);

    CHECK_THROWS_AS(efficiency::reduction_ratio(576, 4096, 11008, 0.0), ValidationError);
    CHECK_THROWS_AS(efficiency::reduction_ratio(576, 4096, 11008, 1.01), ValidationError);
    CostProfile p{2880, 4096, 11008, 32, 2, 320.0 / 2880.0};
    CHECK(efficiency::reduction_ratio(p) == f);
}

TEST_CASE("kv cache bytes") {
    CHECK(efficiency::kv_cache_bytes(1, 1, 1) == 4);
    const auto full = efficiency::kv_cache_bytes(576, 4096, 32);
    CHECK(full == 301989888);
    CHECK(std::abs(efficiency::to_megabytes(full) - 302.0) < 0.05);
    CHECK(std::abs(efficiency::to_megabytes(full) / 303.6 - 1.0) < 0.05);
    CHECK(efficiency::kv_cache_bytes(64, 4096, 32) == 33554432);
    CHECK(efficiency::to_mebibytes(33554432) == 32.0);
    for (std::uint64_t n = 1; n < 100; n += 9) {
        CHECK(efficiency::kv_cache_bytes(2 * n, 64, 4) == 2 * efficiency::kv_cache_bytes(n, 64, 4));
    }
    CostProfile p{576, 4096, 11008, 32};
    CHECK(efficiency::kv_cache_bytes(p) == full);
    p.hidden = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("retained tokens and two-point schedule") {
    CHECK(efficiency::retained_tokens(2880, 320.0 / 2880.0) == 320);
    CHECK(efficiency::retained_tokens(576, 1.0) == 576);
    const double base = efficiency::layer_flops(576, 4096, 11008, 32);
    CHECK(efficiency::pipeline_flops(576, 576, 576, 2, 2, 4096, 11008, 32) == base);
    const double two = efficiency::pipeline_flops(576, 288, 64, 0, 2, 4096, 11008, 32);
    CHECK(two == efficiency::layer_flops(288, 4096, 11008, 2) + efficiency::layer_flops(64, 4096, 11008, 30));
    CHECK_THROWS_AS(efficiency::pipeline_flops(576, 288, 64, 3, 2, 4096, 11008, 32), ValidationError);
}
