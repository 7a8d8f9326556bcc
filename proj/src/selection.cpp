// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/selection.hpp"

#include <algorithm>
#include <string>

#include "visiontrim/error.hpp"

namespace visiontrim {

std::vector<std::size_t> complement_indices(std::size_t n, std::span<const std::size_t> taken) {
    std::vector<std::size_t> out;
    out.reserve(n - std::min(n, taken.size()));
    std::size_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t < taken.size() && taken[t] == i) {
            ++t;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

SelectionResult complement_selection(const Tensor& tokens, std::span<const GridPos> positions,
                                     std::vector<std::size_t> dominant, const Tensor& text,
                                     std::span<const double> center_scores, std::size_t r, std::size_t iterations) {
    const std::size_t n = tokens.rows();
    if (!std::is_sorted(dominant.begin(), dominant.end()) ||
        std::adjacent_find(dominant.begin(), dominant.end()) != dominant.end() || dominant.empty() ||
        dominant.back() >= n) {
        throw ValidationError("dominant indices must be distinct, ascending and in range");
    }
    if (!positions.empty() && positions.size() != n) {
        throw ValidationError("positions must cover every input token");
    }
    const auto remaining = complement_indices(n, dominant);
    if (r > remaining.size()) {
        throw ValidationError("complement budget R = " + std::to_string(r) + " exceeds the " +
                              std::to_string(remaining.size()) + " remaining tokens");
    }

    SelectionResult out;
    out.input_count = n;
    out.dominant = std::move(dominant);
    const Tensor dominant_tokens = Tensor::gather_rows(tokens, out.dominant);

    Tensor complement;
    if (r > 0) {
        if (center_scores.size() != remaining.size()) {
            throw ValidationError("center scores must cover every remaining token");
        }
        out.center_scores.assign(center_scores.begin(), center_scores.end());
        const Tensor remaining_tokens = Tensor::gather_rows(tokens, remaining);
        const auto local_centers = tgvc::pick_centers(center_scores, r);
        const ClusterState initial = tgvc::assign_tokens(remaining_tokens, text, local_centers);
        ClusterState final_state;
        complement = tgvc::aggregate_clusters(initial, remaining_tokens, text, iterations, &final_state);
        for (std::size_t c : final_state.centers) {
            out.centers.push_back(remaining[c]);
        }
        for (std::size_t m : final_state.members) {
            out.members.push_back(remaining[m]);
        }
        out.member_labels = final_state.labels;
    }

    auto composed = tgvc::compose_final(dominant_tokens, complement);
    out.tokens = std::move(composed.final_tokens);
    out.provenance = std::move(composed.provenance);
    out.source = out.dominant;
    out.source.insert(out.source.end(), out.centers.begin(), out.centers.end());
    if (!positions.empty()) {
        for (std::size_t s : out.source) {
            out.positions.push_back(positions[s]);
        }
    }
    return out;
}

}  // namespace visiontrim
