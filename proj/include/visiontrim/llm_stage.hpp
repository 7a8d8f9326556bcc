// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "visiontrim/dvts.hpp"
#include "visiontrim/selection.hpp"
#include "visiontrim/tensor.hpp"

namespace visiontrim {

/// Decoder hidden states at the pruning layer. `h_gen` is the state at the last prompt
/// position, i.e. the position that predicts the first generated token.
struct DecoderHiddenStates {
    Tensor h_gen;  // 1 x D
    Tensor h_v;    // N_v x D
    Tensor h_t;    // N_t x D

    void validate() const;
    std::size_t hidden_size() const {
        return h_v.cols();
    }
};

/// Axis of the visual-text attention softmax used for the cross-modal scores.
/// `text` normalizes each visual row over text tokens (every score is then 1/N_t);
/// `visual` normalizes each text column over visual tokens.
enum class CrossModalAxis { text, visual };

std::string_view to_string(CrossModalAxis axis);
CrossModalAxis parse_cross_modal_axis(std::string_view name);

/// LTAM inputs at the decoding stage: survivor features and their original grid cells.
struct StageLtam {
    Tensor features;
    std::vector<GridPos> positions;
    TokenGrid grid;
    LtamParams params;
};

struct Stage2Options {
    CrossModalAxis axis = CrossModalAxis::text;
    bool swap_fusion_weight = false;
    std::size_t tgvc_iterations = 1;
};

namespace llm_stage {

/// softmax over visual tokens of h_gen . h_v^T / sqrt(D).
ImportanceScores gen_token_scores(const DecoderHiddenStates& states);

/// alpha_i = mean over text tokens j of A[i, j], A = softmax(h_v h_t^T / sqrt(D)) along `axis`.
std::vector<double> cross_modal_scores(const DecoderHiddenStates& states, CrossModalAxis axis = CrossModalAxis::text);

/// Dominant selection by first-generated-token attention (fused with LTAM when survivor
/// grid cells are supplied), then a text-guided complement whose center scores are the
/// cross-modal scores over the remaining tokens. When those are constant the centers
/// fall back to the visual-axis scores, then to the generated-token scores.
SelectionResult stage2_prune(const DecoderHiddenStates& states, const std::optional<StageLtam>& ltam, std::size_t k,
                             std::size_t r, const Stage2Options& options = {});

}  // namespace llm_stage
}  // namespace visiontrim
