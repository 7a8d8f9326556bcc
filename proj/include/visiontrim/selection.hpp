// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "visiontrim/dvts.hpp"
#include "visiontrim/tensor.hpp"
#include "visiontrim/tgvc.hpp"

namespace visiontrim {

/// Outcome of one pruning point. Token indices refer to rows of the stage input.
struct SelectionResult {
    Tensor tokens;  // (K + R) x d: dominant rows first (ascending), then complements in center order
    std::vector<Provenance> provenance;
    std::vector<std::size_t> source;  // stage-input row behind each output token (the center for complements)
    std::vector<GridPos> positions;   // original grid cell per output token; empty without a grid
    std::optional<TokenGrid> grid;
    std::size_t input_count = 0;

    std::vector<std::size_t> dominant;
    std::vector<std::size_t> centers;
    std::vector<std::size_t> members;        // merged non-center tokens, ascending
    std::vector<std::size_t> member_labels;  // center rank per member

    ImportanceScores global;
    ImportanceScores local;  // empty when no LTAM ran
    ImportanceScores fused;
    double alpha = 1.0;
    std::vector<double> center_scores;  // over the remaining tokens
    std::string center_score_source;

    std::size_t num_dominant() const noexcept {
        return dominant.size();
    }
    std::size_t num_complement() const noexcept {
        return centers.size();
    }
};

/// Indices in [0, n) not present in the ascending list `taken`.
std::vector<std::size_t> complement_indices(std::size_t n, std::span<const std::size_t> taken);

/// Shared back half of both pruning points: keep `dominant`, cluster the rest around the
/// top-`r` entries of `center_scores` (indexed over the remaining rows) and merge.
/// `positions` may be empty. Fills every field except the score vectors.
SelectionResult complement_selection(const Tensor& tokens, std::span<const GridPos> positions,
                                     std::vector<std::size_t> dominant, const Tensor& text,
                                     std::span<const double> center_scores, std::size_t r, std::size_t iterations);

}  // namespace visiontrim
