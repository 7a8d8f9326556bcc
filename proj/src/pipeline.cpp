// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visiontrim/error.hpp"
#include "visiontrim/tgvc.hpp"

namespace visiontrim {

StageBudget plan_budget(std::size_t total, std::size_t retain, Ratio ratio) {
    if (retain == 0) {
        throw ValidationError("retain must be positive");
    }
    if (retain > total) {
        throw ValidationError("retain (" + std::to_string(retain) + ") exceeds the token count (" +
                              std::to_string(total) + ")");
    }
    if (ratio.dominant == 0 || ratio.complement == 0) {
        throw ValidationError("DVTS:TGVC ratio terms must be positive");
    }
    // Integer round-half-up of retain * a / (a + b).
    const std::size_t parts = ratio.dominant + ratio.complement;
    const std::size_t k = (2 * retain * ratio.dominant + parts) / (2 * parts);
    return {k, retain - k};
}

StageBudget stage_budget(const BudgetPlan& plan, std::size_t available, std::size_t retain) {
    if (!plan.tgvc_enabled) {
        if (retain == 0 || retain > available) {
            throw ValidationError("retain (" + std::to_string(retain) + ") must lie in [1, " +
                                  std::to_string(available) + "]");
        }
        return {retain, 0};
    }
    StageBudget budget = plan_budget(available, retain, plan.ratio);
    if (budget.r == 0 && retain >= 2) {
        // TGVC keeps at least one complement token whenever K can spare one.
        budget = {retain - 1, 1};
    }
    return budget;
}

std::size_t stage1_retain(const BudgetPlan& plan, bool two_stage) {
    if (!two_stage) {
        return plan.retain;
    }
    if (!(plan.stage1_retain_rate > 0.0 && plan.stage1_retain_rate <= 1.0)) {
        throw ValidationError("stage-1 retention rate must lie in (0, 1]");
    }
    const auto kept = static_cast<std::size_t>(std::llround(plan.stage1_retain_rate * plan.total_tokens));
    return std::clamp(kept, std::min(plan.retain, plan.total_tokens), plan.total_tokens);
}

Stage2Count stage2_retain(std::size_t target, std::size_t stage1_kept, std::size_t n_v, std::optional<double> rate) {
    if (n_v == 0 || stage1_kept == 0) {
        throw ValidationError("stage 2 needs at least one visual token");
    }
    double wanted = 0.0;
    if (rate) {
        if (!(*rate >= 0.0 && *rate <= 1.0)) {
            throw ValidationError("stage-2 retention rate must lie in [0, 1]");
        }
        wanted = *rate * static_cast<double>(n_v);
    } else {
        wanted = static_cast<double>(target) / static_cast<double>(stage1_kept) * static_cast<double>(n_v);
    }
    const auto rounded = static_cast<long long>(std::llround(wanted));
    const auto clamped = std::clamp<long long>(rounded, 1, static_cast<long long>(n_v));
    return {static_cast<std::size_t>(clamped), clamped != rounded};
}

namespace pipeline {

SelectionResult run_vision_stage(const Tensor& features, const ClsAttention& cls_attention, const TokenGrid& grid,
                                 const Tensor& text, const BudgetPlan& plan, std::size_t retain) {
    if (features.rank() != 2 || features.rows() != grid.size()) {
        throw ValidationError("features " + features.shape_string() + " do not match a " +
                              std::to_string(grid.height) + "x" + std::to_string(grid.width) + " grid");
    }
    if (cls_attention.rows.rank() != 2 || cls_attention.rows.cols() != features.rows()) {
        throw ValidationError("CLS attention " + cls_attention.rows.shape_string() + " does not cover " +
                              std::to_string(features.rows()) + " tokens");
    }
    const StageBudget budget = stage_budget(plan, features.rows(), retain);

    const ImportanceScores global = dvts::global_scores(cls_attention);
    ImportanceScores local = dvts::ltam_scores(features, grid, plan.ltam);
    FusedScores fused = dvts::adaptive_fuse(global, local, plan.swap_fusion_weight);
    auto dominant = dvts::select_dominant(fused.fused, budget.k);

    std::vector<double> center_scores;
    if (budget.r > 0) {
        const auto remaining = complement_indices(features.rows(), dominant);
        center_scores = tgvc::text_relevance(text, Tensor::gather_rows(features, remaining)).s;
    }
    const auto positions = grid.positions();
    SelectionResult out = complement_selection(features, positions, std::move(dominant), text, center_scores,
                                               budget.r, plan.tgvc_iterations);
    out.grid = grid;
    out.global = global;
    out.local = std::move(local);
    out.fused = std::move(fused.fused);
    out.alpha = fused.alpha;
    out.center_score_source = budget.r > 0 ? "text_relevance" : "";
    return out;
}

SelectionResult run_vision_stage(const Tensor& features, const ClsAttention& cls_attention, const TokenGrid& grid,
                                 const Tensor& text, const BudgetPlan& plan) {
    return run_vision_stage(features, cls_attention, grid, text, plan, plan.retain);
}

LlmStageReport run_llm_stage(const SelectionResult& selection, const DecoderHiddenStates& states,
                             const BudgetPlan& plan) {
    states.validate();
    const std::size_t n_v = states.h_v.rows();
    if (n_v != selection.tokens.rows()) {
        throw ValidationError("decoder visual states (" + std::to_string(n_v) + ") do not match the " +
                              std::to_string(selection.tokens.rows()) + " tokens kept by stage 1");
    }
    LlmStageReport report;
    report.count = stage2_retain(plan.retain, selection.tokens.rows(), n_v, plan.stage2_retain_rate);
    if (report.count.clamped) {
        report.warnings.push_back("stage-2 retention clamped to " + std::to_string(report.count.retain) + " of " +
                                  std::to_string(n_v) + " tokens");
    }
    const StageBudget budget = stage_budget(plan, n_v, report.count.retain);

    std::optional<StageLtam> ltam;
    if (selection.grid && selection.positions.size() == n_v) {
        ltam = StageLtam{states.h_v, selection.positions, *selection.grid, plan.ltam};
    }
    Stage2Options options;
    options.axis = plan.cross_modal_axis;
    options.swap_fusion_weight = plan.swap_fusion_weight;
    options.tgvc_iterations = plan.tgvc_iterations;
    report.selection = llm_stage::stage2_prune(states, ltam, budget.k, budget.r, options);
    return report;
}

}  // namespace pipeline

// ---------------------------------------------------------------------------
// Video

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        ab += a[c] * b[c];
        aa += a[c] * a[c];
        bb += b[c] * b[c];
    }
    if (aa == 0.0 || bb == 0.0) {
        return 0.0;
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

std::vector<double> widen(std::span<const float> v) {
    return {v.begin(), v.end()};
}

}  // namespace

FrameSet FrameSet::from_tensor(const Tensor& stacked) {
    if (stacked.rank() != 3) {
        throw ValidationError("video features must be F x N x d, got " + stacked.shape_string());
    }
    FrameSet set;
    for (std::size_t f = 0; f < stacked.dim(0); ++f) {
        set.frames.push_back(stacked.slice(f));
        set.frame_ids.push_back(f);
    }
    return set;
}

void FrameSet::validate() const {
    if (frames.empty()) {
        throw ValidationError("frame set is empty");
    }
    if (frame_ids.size() != frames.size()) {
        throw ValidationError("frame set ids do not match its frames");
    }
    for (const auto& f : frames) {
        if (f.rank() != 2 || f.dims() != frames.front().dims()) {
            throw ValidationError("frames must share token count and width");
        }
        f.require_finite("frame features");
    }
}

std::vector<double> FrameSet::pooled(std::size_t f) const {
    const Tensor& frame = frames.at(f);
    std::vector<double> mean(frame.cols(), 0.0);
    for (std::size_t t = 0; t < frame.rows(); ++t) {
        auto row = frame.row(t);
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] += row[c];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(frame.rows());
    }
    return mean;
}

FrameClusterResult frame_cluster(const FrameSet& frames, std::size_t keep_frames) {
    frames.validate();
    const std::size_t count = frames.size();
    if (keep_frames == 0 || keep_frames > count) {
        throw ValidationError("keep_frames = " + std::to_string(keep_frames) + " must lie in [1, " +
                              std::to_string(count) + "]");
    }

    std::vector<std::vector<double>> pooled(count);
    for (std::size_t f = 0; f < count; ++f) {
        pooled[f] = frames.pooled(f);
    }
    FrameClusterResult out;
    out.similarity.assign(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        if (count == 1) {
            break;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < count; ++j) {
            if (j != i) {
                sum += cosine(pooled[i], pooled[j]);
            }
        }
        out.similarity[i] = sum / static_cast<double>(count - 1);
    }

    // Lowest similarity first: top-k of the negated values keeps the lower-index tie-break.
    std::vector<double> distinctiveness(count);
    for (std::size_t i = 0; i < count; ++i) {
        distinctiveness[i] = -out.similarity[i];
    }
    out.centers = dvts::top_k(distinctiveness, keep_frames);

    out.assignment.assign(count, 0);
    std::vector<bool> is_center(count, false);
    for (std::size_t slot = 0; slot < keep_frames; ++slot) {
        is_center[out.centers[slot]] = true;
        out.assignment[out.centers[slot]] = slot;
    }
    for (std::size_t f = 0; f < count; ++f) {
        if (is_center[f]) {
            continue;
        }
        std::size_t best = 0;
        double best_sim = cosine(pooled[f], pooled[out.centers[0]]);
        for (std::size_t slot = 1; slot < keep_frames; ++slot) {
            const double sim = cosine(pooled[f], pooled[out.centers[slot]]);
            if (sim > best_sim) {
                best_sim = sim;
                best = slot;
            }
        }
        out.assignment[f] = best;
    }

    for (std::size_t slot = 0; slot < keep_frames; ++slot) {
        const Tensor& center = frames.frames[out.centers[slot]];
        const std::size_t tokens = center.rows();
        const std::size_t dim = center.cols();
        std::vector<std::vector<double>> center_rows(tokens);
        std::vector<double> acc(tokens * dim);
        std::vector<std::size_t> members(tokens, 1);
        for (std::size_t t = 0; t < tokens; ++t) {
            center_rows[t] = widen(center.row(t));
            std::copy(center_rows[t].begin(), center_rows[t].end(), acc.begin() + static_cast<std::ptrdiff_t>(t * dim));
        }
        for (std::size_t f = 0; f < count; ++f) {
            if (is_center[f] || out.assignment[f] != slot) {
                continue;
            }
            const Tensor& frame = frames.frames[f];
            for (std::size_t t = 0; t < tokens; ++t) {
                const auto token = widen(frame.row(t));
                std::size_t nearest = 0;
                double nearest_sim = cosine(token, center_rows[0]);
                for (std::size_t u = 1; u < tokens; ++u) {
                    const double sim = cosine(token, center_rows[u]);
                    if (sim > nearest_sim) {
                        nearest_sim = sim;
                        nearest = u;
                    }
                }
                for (std::size_t c = 0; c < dim; ++c) {
                    acc[nearest * dim + c] += token[c];
                }
                ++members[nearest];
            }
        }
        Tensor merged({tokens, dim});
        for (std::size_t t = 0; t < tokens; ++t) {
            auto dst = merged.row(t);
            for (std::size_t c = 0; c < dim; ++c) {
                dst[c] = static_cast<float>(acc[t * dim + c] / static_cast<double>(members[t]));
            }
        }
        out.frames.frames.push_back(std::move(merged));
        out.frames.frame_ids.push_back(frames.frame_ids[out.centers[slot]]);
    }
    return out;
}

VideoResult run_video(const FrameSet& frames, const Tensor& cls_attention, const TokenGrid& grid, const Tensor& text,
                      const BudgetPlan& plan, const VideoPlan& video) {
    frames.validate();
    if (cls_attention.rank() != 3 || cls_attention.dim(0) != frames.size()) {
        throw ValidationError("video CLS attention must be F x H x N with F = " + std::to_string(frames.size()) +
                              ", got " + cls_attention.shape_string());
    }
    VideoResult out;
    out.clustering = frame_cluster(frames, video.keep_frames);
    std::vector<float> data;
    std::size_t rows = 0;
    for (std::size_t slot = 0; slot < out.clustering.frames.size(); ++slot) {
        const std::size_t source = out.clustering.centers[slot];
        const auto attn = ClsAttention::from_tensor(cls_attention.slice(source));
        auto selection = pipeline::run_vision_stage(out.clustering.frames.frames[slot], attn, grid, text, plan,
                                                    video.tokens_per_frame);
        data.insert(data.end(), selection.tokens.data().begin(), selection.tokens.data().end());
        rows += selection.tokens.rows();
        out.per_frame.push_back(std::move(selection));
    }
    out.tokens = Tensor({rows, frames.frames.front().cols()}, std::move(data));
    return out;
}

}  // namespace visiontrim
