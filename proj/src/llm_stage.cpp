// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/llm_stage.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visiontrim/error.hpp"

namespace visiontrim {

void DecoderHiddenStates::validate() const {
    if (h_gen.rank() != 2 || h_v.rank() != 2 || h_t.rank() != 2) {
        throw ValidationError("decoder hidden states must be matrices");
    }
    if (h_gen.rows() != 1) {
        throw ValidationError("h_gen must be 1 x D, got " + h_gen.shape_string());
    }
    if (h_v.cols() != h_gen.cols() || h_t.cols() != h_gen.cols()) {
        throw ValidationError("hidden sizes differ: h_gen " + h_gen.shape_string() + ", h_v " + h_v.shape_string() +
                              ", h_t " + h_t.shape_string());
    }
    h_gen.require_finite("h_gen");
    h_v.require_finite("h_v");
    h_t.require_finite("h_t");
}

std::string_view to_string(CrossModalAxis axis) {
    return axis == CrossModalAxis::text ? "text" : "visual";
}

CrossModalAxis parse_cross_modal_axis(std::string_view name) {
    if (name == "text") {
        return CrossModalAxis::text;
    }
    if (name == "visual") {
        return CrossModalAxis::visual;
    }
    throw ValidationError("cross_modal_axis must be \"text\" or \"visual\", got \"" + std::string(name) + "\"");
}

namespace llm_stage {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        acc += static_cast<double>(a[c]) * static_cast<double>(b[c]);
    }
    return acc;
}

bool is_constant(std::span<const double> v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

std::vector<double> normalized(std::vector<double> v) {
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    for (double& x : v) {
        x /= sum;
    }
    return v;
}

template <typename T>
std::vector<T> restrict_to(const std::vector<T>& v, std::span<const std::size_t> idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(v[i]);
    }
    return out;
}

}  // namespace

ImportanceScores gen_token_scores(const DecoderHiddenStates& states) {
    states.validate();
    const double scale = 1.0 / std::sqrt(static_cast<double>(states.hidden_size()));
    std::vector<double> logits(states.h_v.rows());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] = dot(states.h_gen.row(0), states.h_v.row(i)) * scale;
    }
    return {softmax(logits)};
}

std::vector<double> cross_modal_scores(const DecoderHiddenStates& states, CrossModalAxis axis) {
    states.validate();
    const std::size_t nv = states.h_v.rows();
    const std::size_t nt = states.h_t.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(states.hidden_size()));

    std::vector<double> logits(nv * nt);
    for (std::size_t i = 0; i < nv; ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            logits[i * nt + j] = dot(states.h_v.row(i), states.h_t.row(j)) * scale;
        }
    }

    std::vector<double> alpha(nv, 0.0);
    if (axis == CrossModalAxis::text) {
        // Each row shares one denominator, so the row mean is (sum_j e_ij / Z_i) / N_t.
        for (std::size_t i = 0; i < nv; ++i) {
            const auto row = std::span<const double>(logits).subspan(i * nt, nt);
            const double peak = *std::max_element(row.begin(), row.end());
            double z = 0.0;
            for (double x : row) {
                z += std::exp(x - peak);
            }
            double mass = 0.0;
            for (double x : row) {
                mass += std::exp(x - peak);
            }
            alpha[i] = (mass / z) / static_cast<double>(nt);
        }
        return alpha;
    }

    std::vector<double> column(nv);
    for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t i = 0; i < nv; ++i) {
            column[i] = logits[i * nt + j];
        }
        const auto probs = softmax(column);
        for (std::size_t i = 0; i < nv; ++i) {
            alpha[i] += probs[i];
        }
    }
    for (double& a : alpha) {
        a /= static_cast<double>(nt);
    }
    return alpha;
}

SelectionResult stage2_prune(const DecoderHiddenStates& states, const std::optional<StageLtam>& ltam, std::size_t k,
                             std::size_t r, const Stage2Options& options) {
    states.validate();
    const std::size_t nv = states.h_v.rows();
    if (k == 0 || k + r > nv) {
        throw ValidationError("stage-2 budget K = " + std::to_string(k) + ", R = " + std::to_string(r) +
                              " does not fit " + std::to_string(nv) + " visual tokens");
    }

    const ImportanceScores global = gen_token_scores(states);
    ImportanceScores local;
    ImportanceScores fused = global;
    double alpha = 1.0;
    if (ltam) {
        if (ltam->positions.size() != nv) {
            throw ValidationError("stage-2 LTAM positions must cover every visual token");
        }
        local = dvts::ltam_scores(ltam->features, ltam->positions, ltam->grid, ltam->params);
        auto f = dvts::adaptive_fuse(global, local, options.swap_fusion_weight);
        fused = std::move(f.fused);
        alpha = f.alpha;
    }
    auto dominant = dvts::select_dominant(fused, k);
    const auto remaining = complement_indices(nv, dominant);

    std::vector<double> center_scores;
    std::string source;
    if (r > 0) {
        center_scores = normalized(restrict_to(cross_modal_scores(states, options.axis), remaining));
        source = std::string("cross_modal:") + std::string(to_string(options.axis));
        if (is_constant(center_scores) && options.axis == CrossModalAxis::text) {
            center_scores = normalized(restrict_to(cross_modal_scores(states, CrossModalAxis::visual), remaining));
            source = "cross_modal:visual";
        }
        if (is_constant(center_scores)) {
            center_scores = normalized(restrict_to(global.values, remaining));
            source = "gen_token";
        }
    }

    const std::vector<GridPos> no_positions;
    SelectionResult out =
        complement_selection(states.h_v, ltam ? std::span<const GridPos>(ltam->positions) : no_positions,
                             std::move(dominant), states.h_t, center_scores, r, options.tgvc_iterations);
    if (ltam) {
        out.grid = ltam->grid;
    }
    out.global = global;
    out.local = std::move(local);
    out.fused = std::move(fused);
    out.alpha = alpha;
    out.center_score_source = std::move(source);
    return out;
}

}  // namespace llm_stage
}  // namespace visiontrim
