// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/tgvc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visiontrim/dvts.hpp"
#include "visiontrim/error.hpp"

namespace visiontrim {

std::string_view to_string(Provenance p) {
    return p == Provenance::dominant ? "dominant" : "complement";
}

namespace tgvc {

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        acc += static_cast<double>(a[c]) * static_cast<double>(b[c]);
    }
    return acc;
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw ValidationError(std::string(what) + " must be a matrix, got " + t.shape_string());
    }
    t.require_finite(what);
}

void require_same_width(const Tensor& a, const Tensor& b, const char* what) {
    if (a.cols() != b.cols()) {
        throw ValidationError(std::string(what) + ": feature dims differ (" + std::to_string(a.cols()) + " vs " +
                              std::to_string(b.cols()) + ")");
    }
}

}  // namespace

TextRelevance text_relevance(const Tensor& text, const Tensor& remaining) {
    if (remaining.empty()) {
        throw ValidationError("text_relevance: no remaining tokens");
    }
    require_matrix(text, "text features");
    require_matrix(remaining, "remaining tokens");
    require_same_width(text, remaining, "text_relevance");

    const std::size_t text_len = text.rows();
    const std::size_t n = remaining.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(text.cols()));

    TextRelevance out{std::vector<double>(n, 0.0), Tensor({text_len, n})};
    std::vector<double> logits(n);
    for (std::size_t l = 0; l < text_len; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            logits[i] = dot(text.row(l), remaining.row(i)) * scale;
        }
        const auto probs = softmax(logits);
        auto dst = out.t2v.row(l);
        for (std::size_t i = 0; i < n; ++i) {
            dst[i] = static_cast<float>(probs[i]);
            out.s[i] += probs[i];
        }
    }
    for (double& v : out.s) {
        v /= static_cast<double>(text_len);
    }
    return out;
}

std::vector<std::size_t> pick_centers(std::span<const double> s, std::size_t r) {
    return dvts::top_k(s, r);
}

ClusterState assign_tokens(const Tensor& remaining, const Tensor& text, std::span<const std::size_t> centers) {
    require_matrix(remaining, "remaining tokens");
    for (std::size_t c : centers) {
        if (c >= remaining.rows()) {
            throw ValidationError("assign_tokens: center index " + std::to_string(c) + " out of range");
        }
    }
    if (centers.empty()) {
        throw ValidationError("assign_tokens: no centers");
    }
    return assign_tokens(remaining, text, centers, Tensor::gather_rows(remaining, centers));
}

ClusterState assign_tokens(const Tensor& remaining, const Tensor& text, std::span<const std::size_t> centers,
                           const Tensor& center_vectors) {
    require_matrix(remaining, "remaining tokens");
    require_matrix(text, "text features");
    require_matrix(center_vectors, "center vectors");
    require_same_width(text, remaining, "assign_tokens");
    require_same_width(center_vectors, remaining, "assign_tokens");
    const std::size_t n = remaining.rows();
    const std::size_t r = centers.size();
    if (r == 0 || center_vectors.rows() != r) {
        throw ValidationError("assign_tokens: need one center vector per center");
    }
    std::vector<bool> is_center(n, false);
    for (std::size_t c : centers) {
        if (c >= n) {
            throw ValidationError("assign_tokens: center index " + std::to_string(c) + " out of range");
        }
        if (is_center[c]) {
            throw ValidationError("assign_tokens: duplicate center " + std::to_string(c));
        }
        is_center[c] = true;
    }

    const std::size_t text_len = text.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(text.cols()));

    // Text-to-center affinity, softmax across centers for each text token (L x R).
    std::vector<double> t2c(text_len * r);
    {
        std::vector<double> logits(r);
        for (std::size_t l = 0; l < text_len; ++l) {
            for (std::size_t j = 0; j < r; ++j) {
                logits[j] = dot(text.row(l), center_vectors.row(j)) * scale;
            }
            const auto probs = softmax(logits);
            std::copy(probs.begin(), probs.end(), t2c.begin() + static_cast<std::ptrdiff_t>(l * r));
        }
    }

    ClusterState state;
    state.centers.assign(centers.begin(), centers.end());
    for (std::size_t i = 0; i < n; ++i) {
        if (!is_center[i]) {
            state.members.push_back(i);
        }
    }
    state.labels.resize(state.members.size());
    state.scores.assign(state.members.size() * r, 0.0);

    std::vector<double> logits(text_len);
    for (std::size_t m = 0; m < state.members.size(); ++m) {
        auto v = remaining.row(state.members[m]);
        for (std::size_t l = 0; l < text_len; ++l) {
            logits[l] = dot(v, text.row(l)) * scale;
        }
        const auto v2t = softmax(logits);
        std::size_t best = 0;
        for (std::size_t j = 0; j < r; ++j) {
            double a = 0.0;
            for (std::size_t l = 0; l < text_len; ++l) {
                a += v2t[l] * t2c[l * r + j];
            }
            state.scores[m * r + j] = a;
            if (a > state.scores[m * r + best]) {
                best = j;
            }
        }
        state.labels[m] = best;
    }
    return state;
}

std::vector<double> cluster_weights(const ClusterState& state) {
    const std::size_t r = state.num_centers();
    std::vector<double> mass(r, 0.0);
    for (std::size_t m = 0; m < state.members.size(); ++m) {
        mass[state.labels[m]] += state.score(m, state.labels[m]);
    }
    std::vector<double> weights(state.members.size());
    for (std::size_t m = 0; m < state.members.size(); ++m) {
        const std::size_t j = state.labels[m];
        weights[m] = state.score(m, j) / mass[j];
    }
    return weights;
}

namespace {

Tensor merge_into_centers(const ClusterState& state, const Tensor& remaining) {
    const std::size_t r = state.num_centers();
    const std::size_t dim = remaining.cols();
    const auto weights = cluster_weights(state);
    std::vector<double> acc(r * dim, 0.0);
    for (std::size_t m = 0; m < state.members.size(); ++m) {
        const std::size_t j = state.labels[m];
        auto v = remaining.row(state.members[m]);
        for (std::size_t c = 0; c < dim; ++c) {
            acc[j * dim + c] += weights[m] * static_cast<double>(v[c]);
        }
    }
    Tensor out({r, dim});
    for (std::size_t j = 0; j < r; ++j) {
        auto center = remaining.row(state.centers[j]);
        auto dst = out.row(j);
        for (std::size_t c = 0; c < dim; ++c) {
            dst[c] = static_cast<float>(static_cast<double>(center[c]) + acc[j * dim + c]);
        }
    }
    return out;
}

}  // namespace

Tensor aggregate_clusters(const ClusterState& state, const Tensor& remaining, const Tensor& text,
                          std::size_t iterations, ClusterState* final_state) {
    if (iterations == 0) {
        throw ValidationError("aggregate_clusters: iterations must be at least 1");
    }
    if (state.labels.size() != state.members.size() ||
        state.scores.size() != state.members.size() * state.num_centers()) {
        throw ValidationError("aggregate_clusters: inconsistent cluster state");
    }
    ClusterState current = state;
    Tensor merged = merge_into_centers(current, remaining);
    for (std::size_t it = 1; it < iterations; ++it) {
        current = assign_tokens(remaining, text, current.centers, merged);
        merged = merge_into_centers(current, remaining);
    }
    if (final_state != nullptr) {
        *final_state = std::move(current);
    }
    return merged;
}

ComplementResult compose_final(const Tensor& dominant, const Tensor& complement) {
    require_matrix(dominant, "dominant tokens");
    ComplementResult out;
    out.provenance.assign(dominant.rows(), Provenance::dominant);
    if (complement.empty()) {
        out.final_tokens = dominant;
        return out;
    }
    require_matrix(complement, "complement tokens");
    require_same_width(dominant, complement, "compose_final");
    std::vector<float> data(dominant.data().begin(), dominant.data().end());
    data.insert(data.end(), complement.data().begin(), complement.data().end());
    out.final_tokens = Tensor({dominant.rows() + complement.rows(), dominant.cols()}, std::move(data));
    out.provenance.resize(out.final_tokens.rows(), Provenance::complement);
    out.complement = complement;
    return out;
}

}  // namespace tgvc
}  // namespace visiontrim
