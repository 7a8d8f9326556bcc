// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "visiontrim/tensor.hpp"

namespace visiontrim {

struct TextRelevance {
    std::vector<double> s;  // per remaining token, sums to 1
    Tensor t2v;             // L x (N - K), rows are distributions over remaining tokens
};

/// Text-mediated clustering of the remaining (non-dominant) tokens.
///
/// All indices are local to the remaining-token matrix. `members` lists every
/// non-center remaining token in ascending order; `labels[m]` is the center rank
/// (position in `centers`) that member m is assigned to, and `scores` holds the
/// members x R assignment matrix a_ij.
struct ClusterState {
    std::vector<std::size_t> centers;
    std::vector<std::size_t> members;
    std::vector<std::size_t> labels;
    std::vector<double> scores;

    std::size_t num_centers() const noexcept {
        return centers.size();
    }
    double score(std::size_t member, std::size_t center) const {
        return scores[member * centers.size() + center];
    }
};

enum class Provenance { dominant, complement };

std::string_view to_string(Provenance p);

struct ComplementResult {
    Tensor complement;  // R x d, empty when R = 0
    Tensor final_tokens;
    std::vector<Provenance> provenance;
};

namespace tgvc {

/// Softmax over remaining tokens of T V_r^T / sqrt(d), averaged over text tokens.
TextRelevance text_relevance(const Tensor& text, const Tensor& remaining);

/// Top-r of `s`, lowest-index tie-break, ascending.
std::vector<std::size_t> pick_centers(std::span<const double> s, std::size_t r);

/// Assigns each non-center token to argmax_j a_ij with
/// a_ij = sum_l softmax_l(v_i T^T / sqrt(d))[l] * softmax_j(T C^T / sqrt(d))[l, j].
/// `center_vectors` (R x d) are the vectors the centers are compared by; the
/// overload without it uses the center rows of `remaining`.
ClusterState assign_tokens(const Tensor& remaining, const Tensor& text, std::span<const std::size_t> centers);
ClusterState assign_tokens(const Tensor& remaining, const Tensor& text, std::span<const std::size_t> centers,
                           const Tensor& center_vectors);

/// Normalized merge weight of every member within its cluster (a_ij / sum of a_kj over the cluster).
std::vector<double> cluster_weights(const ClusterState& state);

/// v_j = c_j + weighted mean of the cluster's members; empty clusters yield c_j.
/// With iterations > 1 the merged vectors become the comparison centers for a fresh
/// assignment of the same member pool, and each pass re-merges into the original
/// center tokens. Returns R x d; `final_state` receives the last assignment when given.
Tensor aggregate_clusters(const ClusterState& state, const Tensor& remaining, const Tensor& text,
                          std::size_t iterations = 1, ClusterState* final_state = nullptr);

/// [dominant; complement] with provenance tags. `complement` may be empty (R = 0).
ComplementResult compose_final(const Tensor& dominant, const Tensor& complement);

}  // namespace tgvc
}  // namespace visiontrim
