// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "visiontrim/dvts.hpp"
#include "visiontrim/llm_stage.hpp"
#include "visiontrim/selection.hpp"
#include "visiontrim/tensor.hpp"

namespace visiontrim {

struct Ratio {
    std::size_t dominant = 3;
    std::size_t complement = 1;
};

struct StageBudget {
    std::size_t k = 0;
    std::size_t r = 0;

    std::size_t retain() const noexcept {
        return k + r;
    }
    friend bool operator==(const StageBudget&, const StageBudget&) = default;
};

/// Every knob of a pruning run. Layer indices are carried as metadata only.
struct BudgetPlan {
    std::size_t total_tokens = 0;
    std::size_t retain = 0;                     // end-to-end retained tokens
    Ratio ratio;                                // DVTS : TGVC split
    bool tgvc_enabled = true;
    LtamParams ltam;
    std::size_t tgvc_iterations = 1;
    CrossModalAxis cross_modal_axis = CrossModalAxis::text;
    bool swap_fusion_weight = false;
    double stage1_retain_rate = 0.5;            // used only when an LLM stage follows
    std::optional<double> stage2_retain_rate;   // overrides the derived stage-2 count
    std::size_t vision_layer = 23;
    std::size_t llm_layer = 2;
};

/// K = round(retain * a / (a + b)) (halves round up), R = retain - K.
StageBudget plan_budget(std::size_t total, std::size_t retain, Ratio ratio = {});

/// Stage budget under a plan: R = 0 and K = retain when TGVC is disabled; otherwise the
/// plan_budget split with R raised to 1 when it rounds to 0 and retain >= 2.
StageBudget stage_budget(const BudgetPlan& plan, std::size_t available, std::size_t retain);

/// Stage-1 retained count: `retain` for a single-stage run, round(rate * N) when an LLM
/// stage follows.
std::size_t stage1_retain(const BudgetPlan& plan, bool two_stage);

struct Stage2Count {
    std::size_t retain = 0;
    bool clamped = false;
};

/// round(target / stage1_kept * n_v), or round(rate * n_v) for an explicit rate, clamped to [1, n_v].
Stage2Count stage2_retain(std::size_t target, std::size_t stage1_kept, std::size_t n_v,
                          std::optional<double> rate = std::nullopt);

namespace pipeline {

/// DVTS then TGVC over one image's visual tokens.
SelectionResult run_vision_stage(const Tensor& features, const ClsAttention& cls_attention, const TokenGrid& grid,
                                 const Tensor& text, const BudgetPlan& plan, std::size_t retain);
SelectionResult run_vision_stage(const Tensor& features, const ClsAttention& cls_attention, const TokenGrid& grid,
                                 const Tensor& text, const BudgetPlan& plan);

struct LlmStageReport {
    SelectionResult selection;
    Stage2Count count;
    std::vector<std::string> warnings;
};

/// Second pruning point inside the decoder. `states.h_v` rows correspond to the tokens of
/// `selection`; grid cells carried by the selection enable LTAM on the survivors.
LlmStageReport run_llm_stage(const SelectionResult& selection, const DecoderHiddenStates& states,
                             const BudgetPlan& plan);

}  // namespace pipeline

/// Frames of one video: identical token count and width; pooled feature = token mean.
struct FrameSet {
    std::vector<Tensor> frames;
    std::vector<std::size_t> frame_ids;  // original frame index of each entry

    static FrameSet from_tensor(const Tensor& stacked);  // F x N x d
    std::size_t size() const noexcept {
        return frames.size();
    }
    std::vector<double> pooled(std::size_t f) const;
    void validate() const;
};

struct FrameClusterResult {
    FrameSet frames;                         // one merged frame per center, ascending frame order
    std::vector<double> similarity;          // Sim^i for every input frame
    std::vector<std::size_t> centers;        // input frame index of each output frame
    std::vector<std::size_t> assignment;     // output slot of every input frame
};

/// Keep the `keep_frames` least similar frames as centers, assign every other frame to
/// its most similar center and fold its tokens into the center frame by nearest-token
/// uniform averaging.
FrameClusterResult frame_cluster(const FrameSet& frames, std::size_t keep_frames);

struct VideoPlan {
    std::size_t keep_frames = 8;
    std::size_t tokens_per_frame = 17;
};

struct VideoResult {
    FrameClusterResult clustering;
    std::vector<SelectionResult> per_frame;
    Tensor tokens;  // all kept tokens, frame after frame
};

/// Inter-frame clustering followed by per-frame DVTS + TGVC. `cls_attention` is F x H x N.
VideoResult run_video(const FrameSet& frames, const Tensor& cls_attention, const TokenGrid& grid, const Tensor& text,
                      const BudgetPlan& plan, const VideoPlan& video);

}  // namespace visiontrim
