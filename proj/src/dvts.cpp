// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/dvts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "visiontrim/error.hpp"

namespace visiontrim {

void require_distribution(std::span<const double> values, const char* what, double tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
            throw ValidationError(std::string(what) + ": entry " + std::to_string(i) + " is not a probability");
        }
        sum += values[i];
    }
    if (values.empty() || std::abs(sum - 1.0) > tol) {
        throw ValidationError(std::string(what) + ": does not sum to 1 (sum = " + std::to_string(sum) + ")");
    }
}

ClsAttention ClsAttention::from_tensor(Tensor t) {
    if (t.rank() != 2) {
        throw ValidationError("CLS attention must be H x N, got " + t.shape_string());
    }
    t.require_finite("CLS attention");
    for (std::size_t h = 0; h < t.rows(); ++h) {
        auto r = t.row(h);
        std::vector<double> wide(r.begin(), r.end());
        require_distribution(wide, ("CLS attention head " + std::to_string(h)).c_str());
    }
    return ClsAttention{std::move(t)};
}

std::vector<GridPos> TokenGrid::positions() const {
    std::vector<GridPos> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = position(i);
    }
    return out;
}

void LtamParams::validate() const {
    if (kernel_size == 0 || kernel_size % 2 == 0) {
        throw ValidationError("LTAM kernel size must be odd and positive, got " + std::to_string(kernel_size));
    }
    if (!(std::isfinite(w1) && w1 > 0.0) || !(std::isfinite(w2) && w2 > 0.0)) {
        throw ValidationError("LTAM bandwidths w1, w2 must be finite and positive");
    }
    if (!(std::isfinite(w3) && w3 >= 0.0)) {
        throw ValidationError("LTAM weight w3 must be finite and nonnegative");
    }
    if (!(std::isfinite(sigma_floor) && sigma_floor > 0.0)) {
        throw ValidationError("LTAM sigma floor must be finite and positive");
    }
}

namespace dvts {

ClsAttention cls_attention_from_qk(const AttentionInputs& inputs) {
    const Tensor& q = inputs.q_cls;
    const Tensor& k = inputs.keys;
    if (q.rank() != 2 || k.rank() != 3) {
        throw ValidationError("cls_attention_from_qk expects q_cls H x d_k and keys H x N x d_k, got " +
                              q.shape_string() + " and " + k.shape_string());
    }
    const std::size_t heads = q.dim(0);
    const std::size_t tokens = k.dim(1);
    const std::size_t width = k.dim(2);
    if (k.dim(0) != heads || q.dim(1) != width) {
        throw ValidationError("q_cls " + q.shape_string() + " and keys " + k.shape_string() + " disagree");
    }
    const std::size_t d_k = inputs.d_k.value_or(width);
    if (d_k == 0) {
        throw ValidationError("d_k must be positive");
    }
    q.require_finite("q_cls");
    k.require_finite("keys");

    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    const auto keys = k.data();
    Tensor out({heads, tokens});
    std::vector<double> logits(tokens);
    for (std::size_t h = 0; h < heads; ++h) {
        auto qh = q.row(h);
        for (std::size_t i = 0; i < tokens; ++i) {
            const float* key = keys.data() + (h * tokens + i) * width;
            double dot = 0.0;
            for (std::size_t c = 0; c < width; ++c) {
                dot += static_cast<double>(qh[c]) * static_cast<double>(key[c]);
            }
            logits[i] = dot * scale;
        }
        const auto probs = softmax(logits);
        auto dst = out.row(h);
        for (std::size_t i = 0; i < tokens; ++i) {
            dst[i] = static_cast<float>(probs[i]);
        }
    }
    return ClsAttention{std::move(out)};
}

ImportanceScores global_scores(const ClsAttention& attn) {
    const Tensor& a = attn.rows;
    const std::size_t heads = a.rows();
    const std::size_t tokens = a.cols();
    std::vector<double> mean(tokens, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        auto r = a.row(h);
        for (std::size_t i = 0; i < tokens; ++i) {
            mean[i] += r[i];
        }
    }
    for (double& m : mean) {
        m /= static_cast<double>(heads);
    }
    return {softmax(mean)};
}

namespace {

constexpr std::size_t kAbsent = std::numeric_limits<std::size_t>::max();

struct WindowPair {
    std::size_t a;
    std::size_t b;
    double feat_dist;
    double pos_dist;
};

double population_std(const std::vector<WindowPair>& pairs, double WindowPair::*field) {
    std::vector<double> v;
    v.reserve(pairs.size());
    for (const auto& p : pairs) {
        v.push_back(p.*field);
    }
    return std::sqrt(mean_and_variance(v).variance);
}

}  // namespace

ImportanceScores ltam_scores(const Tensor& features, const TokenGrid& grid, const LtamParams& params) {
    if (features.rank() != 2 || features.rows() != grid.size()) {
        throw ValidationError("LTAM: features " + features.shape_string() + " do not match a " +
                              std::to_string(grid.height) + "x" + std::to_string(grid.width) + " grid");
    }
    const auto positions = grid.positions();
    return ltam_scores(features, positions, grid, params);
}

ImportanceScores ltam_scores(const Tensor& features, std::span<const GridPos> positions, const TokenGrid& grid,
                             const LtamParams& params) {
    params.validate();
    if (features.rank() != 2 || features.rows() != positions.size()) {
        throw ValidationError("LTAM: features " + features.shape_string() + " do not match " +
                              std::to_string(positions.size()) + " positions");
    }
    if (grid.height == 0 || grid.width == 0) {
        throw ValidationError("LTAM: empty grid");
    }
    features.require_finite("LTAM features");
    const std::size_t n = positions.size();
    const std::size_t dim = features.cols();

    std::vector<std::size_t> cell_to_token(grid.size(), kAbsent);
    for (std::size_t i = 0; i < n; ++i) {
        const GridPos p = positions[i];
        if (p.x >= grid.height || p.y >= grid.width) {
            throw ValidationError("LTAM: position of token " + std::to_string(i) + " lies outside the grid");
        }
        auto& slot = cell_to_token[p.x * grid.width + p.y];
        if (slot != kAbsent) {
            throw ValidationError("LTAM: tokens " + std::to_string(slot) + " and " + std::to_string(i) +
                                  " share a grid cell");
        }
        slot = i;
    }

    // Every unordered neighbor pair once: forward half of the k x k window.
    const auto radius = static_cast<std::ptrdiff_t>(params.kernel_size / 2);
    const auto height = static_cast<std::ptrdiff_t>(grid.height);
    const auto width = static_cast<std::ptrdiff_t>(grid.width);
    std::vector<WindowPair> pairs;
    for (std::size_t a = 0; a < n; ++a) {
        const auto x = static_cast<std::ptrdiff_t>(positions[a].x);
        const auto y = static_cast<std::ptrdiff_t>(positions[a].y);
        for (std::ptrdiff_t dx = 0; dx <= radius; ++dx) {
            for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy) {
                if (dx == 0 && dy <= 0) {
                    continue;
                }
                const std::ptrdiff_t u = x + dx;
                const std::ptrdiff_t v = y + dy;
                if (u >= height || v < 0 || v >= width) {
                    continue;
                }
                const std::size_t b = cell_to_token[static_cast<std::size_t>(u * width + v)];
                if (b == kAbsent) {
                    continue;
                }
                auto fa = features.row(a);
                auto fb = features.row(b);
                double sq = 0.0;
                for (std::size_t c = 0; c < dim; ++c) {
                    const double diff = static_cast<double>(fa[c]) - static_cast<double>(fb[c]);
                    sq += diff * diff;
                }
                const double pos = std::sqrt(static_cast<double>(dx * dx + dy * dy));
                pairs.push_back({a, b, std::sqrt(sq), pos});
            }
        }
    }

    std::vector<double> feat_sum(n, 0.0);
    std::vector<double> pos_sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    if (!pairs.empty()) {
        const double feat_sigma = std::max(population_std(pairs, &WindowPair::feat_dist), params.sigma_floor);
        const double pos_sigma = std::max(population_std(pairs, &WindowPair::pos_dist), params.sigma_floor);
        const double feat_scale = params.w1 * feat_sigma;
        const double pos_scale = params.w2 * pos_sigma;
        for (const auto& p : pairs) {
            const double rf = p.feat_dist / feat_scale;
            const double rp = p.pos_dist / pos_scale;
            const double kf = -(rf * rf);
            const double kp = -(rp * rp);
            feat_sum[p.a] += kf;
            feat_sum[p.b] += kf;
            pos_sum[p.a] += kp;
            pos_sum[p.b] += kp;
            ++count[p.a];
            ++count[p.b];
        }
    }

    // Mean affinity per token; an empty neighborhood scores 0. The feature and positional
    // means are shifted by their own maxima before combining so a floored sigma (huge,
    // constant kernel values) cannot swamp the other term. Softmax is shift invariant.
    std::vector<double> feat_mean(n, 0.0);
    std::vector<double> pos_mean(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (count[i] > 0) {
            feat_mean[i] = feat_sum[i] / static_cast<double>(count[i]);
            pos_mean[i] = pos_sum[i] / static_cast<double>(count[i]);
        }
    }
    const double feat_ref = *std::max_element(feat_mean.begin(), feat_mean.end());
    const double pos_ref = *std::max_element(pos_mean.begin(), pos_mean.end());
    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        logits[i] = (feat_mean[i] - feat_ref) + params.w3 * (pos_mean[i] - pos_ref);
    }
    return {softmax(logits)};
}

FusedScores adaptive_fuse(const ImportanceScores& global, const ImportanceScores& local, bool swap_ratio) {
    if (global.size() != local.size() || global.size() == 0) {
        throw ValidationError("adaptive_fuse: length mismatch (" + std::to_string(global.size()) + " vs " +
                              std::to_string(local.size()) + ")");
    }
    const double var_g = mean_and_variance(global.values).variance;
    const double var_l = mean_and_variance(local.values).variance;
    const double total = var_g + var_l;
    double alpha = 0.5;
    if (total > 0.0) {
        alpha = (swap_ratio ? var_g : var_l) / total;
    }
    FusedScores out;
    out.alpha = alpha;
    out.fused.values.resize(global.size());
    for (std::size_t i = 0; i < global.size(); ++i) {
        out.fused.values[i] = alpha * global[i] + (1.0 - alpha) * local[i];
    }
    return out;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
    if (k == 0 || k > scores.size()) {
        throw ValidationError("top-k: k = " + std::to_string(k) + " must lie in [1, " + std::to_string(scores.size()) +
                              "]");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) {
                              return scores[a] > scores[b];
                          }
                          return a < b;
                      });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> select_dominant(const ImportanceScores& scores, std::size_t k) {
    return top_k(scores.values, k);
}

}  // namespace dvts
}  // namespace visiontrim
