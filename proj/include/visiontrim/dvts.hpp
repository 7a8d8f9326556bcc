// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "visiontrim/tensor.hpp"

namespace visiontrim {

/// A probability distribution over tokens: nonnegative, sums to one.
struct ImportanceScores {
    std::vector<double> values;

    std::size_t size() const noexcept {
        return values.size();
    }
    double operator[](std::size_t i) const {
        return values[i];
    }
};

/// Per-head [CLS] query and key vectors taken from the encoder layer feeding the selection.
struct AttentionInputs {
    Tensor q_cls;  // H x d_k
    Tensor keys;   // H x N x d_k
    /// Scale dimension for the 1/sqrt(d_k) factor; defaults to the last dim of `keys`.
    std::optional<std::size_t> d_k;
};

/// H x N matrix; every row is a distribution over the N visual tokens.
struct ClsAttention {
    Tensor rows;

    /// Wraps and validates an attention tensor (rank 2, finite, rows sum to one within 1e-6).
    static ClsAttention from_tensor(Tensor t);
};

struct GridPos {
    std::size_t x = 0;  // row
    std::size_t y = 0;  // column

    friend bool operator==(const GridPos&, const GridPos&) = default;
};

/// Row-major layout of N = height * width tokens: token i sits at (i / width, i % width).
struct TokenGrid {
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept {
        return height * width;
    }
    GridPos position(std::size_t token) const noexcept {
        return {token / width, token % width};
    }
    std::vector<GridPos> positions() const;
};

struct LtamParams {
    std::size_t kernel_size = 3;
    double w1 = 0.3;  // feature bandwidth
    double w2 = 0.3;  // positional bandwidth
    double w3 = 0.5;  // weight of the positional term
    double sigma_floor = 1e-6;

    void validate() const;
};

struct FusedScores {
    ImportanceScores fused;
    double alpha = 0.0;
};

namespace dvts {

/// softmax(q_cls[h] . keys[h, i] / sqrt(d_k)) over tokens i, per head.
ClsAttention cls_attention_from_qk(const AttentionInputs& inputs);

/// Head-averaged [CLS] attention, then softmax-normalized.
ImportanceScores global_scores(const ClsAttention& attn);

/// Local Token Affinity Measurement over a full grid (token i at grid.position(i)).
ImportanceScores ltam_scores(const Tensor& features, const TokenGrid& grid, const LtamParams& params);

/// LTAM over a sparse subset of grid cells. `positions[i]` is the cell of feature row i;
/// cells not listed are treated as absent and never enter a window.
ImportanceScores ltam_scores(const Tensor& features, std::span<const GridPos> positions, const TokenGrid& grid,
                             const LtamParams& params);

/// Variance-weighted fusion: alpha = var(local) / (var(global) + var(local)) weights the
/// global term. `swap_ratio` exchanges the two variances in the ratio. When both vectors
/// are constant the ratio is 0/0 and alpha is taken as 0.5.
FusedScores adaptive_fuse(const ImportanceScores& global, const ImportanceScores& local, bool swap_ratio = false);

/// Indices of the k largest scores (ties to the lower index), returned ascending.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

std::vector<std::size_t> select_dominant(const ImportanceScores& scores, std::size_t k);

}  // namespace dvts

/// Throws ValidationError unless the scores are nonnegative and sum to 1 within `tol`.
void require_distribution(std::span<const double> values, const char* what, double tol = 1e-6);

}  // namespace visiontrim
