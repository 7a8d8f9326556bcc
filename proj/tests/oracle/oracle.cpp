// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace visiontrim::oracle {

namespace {

long double pop_std(const std::vector<long double>& v) {
    if (v.empty()) {
        return 0.0L;
    }
    long double mean = 0.0L;
    for (long double x : v) {
        mean += x;
    }
    mean /= static_cast<long double>(v.size());
    long double var = 0.0L;
    for (long double x : v) {
        var += (x - mean) * (x - mean);
    }
    return std::sqrt(var / static_cast<long double>(v.size()));
}

long double feature_distance(const Tensor& f, std::size_t a, std::size_t b) {
    long double sq = 0.0L;
    for (std::size_t c = 0; c < f.cols(); ++c) {
        const long double diff = static_cast<long double>(f.at(a, c)) - static_cast<long double>(f.at(b, c));
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

long double position_distance(GridPos a, GridPos b) {
    const long double dx = static_cast<long double>(a.x) - static_cast<long double>(b.x);
    const long double dy = static_cast<long double>(a.y) - static_cast<long double>(b.y);
    return std::sqrt(dx * dx + dy * dy);
}

bool in_window(GridPos a, GridPos b, std::size_t radius) {
    const auto dx = a.x > b.x ? a.x - b.x : b.x - a.x;
    const auto dy = a.y > b.y ? a.y - b.y : b.y - a.y;
    return dx <= radius && dy <= radius;
}

std::vector<double> softmax_ld(const std::vector<long double>& logits) {
    long double peak = logits[0];
    for (long double x : logits) {
        peak = std::max(peak, x);
    }
    std::vector<long double> e(logits.size());
    long double z = 0.0L;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(logits[i] - peak);
        z += e[i];
    }
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<double>(e[i] / z);
    }
    return out;
}

}  // namespace

std::vector<double> reference_softmax(std::span<const double> logits) {
    return softmax_ld(std::vector<long double>(logits.begin(), logits.end()));
}

std::vector<double> brute_force_ltam(const Tensor& features, std::span<const GridPos> positions,
                                     const TokenGrid& grid, const LtamParams& params) {
    (void)grid;
    const std::size_t n = positions.size();
    const std::size_t radius = params.kernel_size / 2;

    // Pass 1: every directed neighbor pair in the sweep, for the global bandwidths.
    std::vector<long double> feat;
    std::vector<long double> pos;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p != q && in_window(positions[p], positions[q], radius)) {
                feat.push_back(feature_distance(features, p, q));
                pos.push_back(position_distance(positions[p], positions[q]));
            }
        }
    }
    const long double sigma_f = std::max(pop_std(feat), static_cast<long double>(params.sigma_floor));
    const long double sigma_p = std::max(pop_std(pos), static_cast<long double>(params.sigma_floor));

    // Pass 2: mean dual-kernel affinity per token.
    std::vector<long double> raw(n, 0.0L);
    for (std::size_t p = 0; p < n; ++p) {
        long double sum = 0.0L;
        std::size_t count = 0;
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q || !in_window(positions[p], positions[q], radius)) {
                continue;
            }
            const long double kf = feature_distance(features, p, q) / (params.w1 * sigma_f);
            const long double kp = position_distance(positions[p], positions[q]) / (params.w2 * sigma_p);
            sum += -(kf * kf) + params.w3 * -(kp * kp);
            ++count;
        }
        raw[p] = count ? sum / static_cast<long double>(count) : 0.0L;
    }
    return softmax_ld(raw);
}

std::vector<double> brute_force_ltam(const Tensor& features, const TokenGrid& grid, const LtamParams& params) {
    std::vector<GridPos> positions;
    for (std::size_t x = 0; x < grid.height; ++x) {
        for (std::size_t y = 0; y < grid.width; ++y) {
            positions.push_back({x, y});
        }
    }
    return brute_force_ltam(features, positions, grid, params);
}

std::vector<std::size_t> brute_force_assignment(const Tensor& remaining, const Tensor& text,
                                                std::span<const std::size_t> centers) {
    const std::size_t n = remaining.rows();
    const std::size_t len = text.rows();
    const std::size_t dim = text.cols();
    const std::size_t r = centers.size();
    const double root = std::sqrt(static_cast<double>(dim));

    auto dot = [&](const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
            s += static_cast<double>(a.at(i, c)) * static_cast<double>(b.at(j, c));
        }
        return s;
    };

    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::find(centers.begin(), centers.end(), i) != centers.end()) {
            continue;
        }
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t j = 0; j < r; ++j) {
            double a_ij = 0.0;
            for (std::size_t l = 0; l < len; ++l) {
                // softmax over text tokens of v_i . T^T
                double z_v = 0.0;
                for (std::size_t l2 = 0; l2 < len; ++l2) {
                    z_v += std::exp(dot(remaining, i, text, l2) / root);
                }
                const double v2t = std::exp(dot(remaining, i, text, l) / root) / z_v;
                // softmax over centers of t_l . C^T
                double z_c = 0.0;
                for (std::size_t j2 = 0; j2 < r; ++j2) {
                    z_c += std::exp(dot(text, l, remaining, centers[j2]) / root);
                }
                const double t2c = std::exp(dot(text, l, remaining, centers[j]) / root) / z_c;
                a_ij += v2t * t2c;
            }
            if (a_ij > best_score) {
                best_score = a_ij;
                best = j;
            }
        }
        labels.push_back(best);
    }
    return labels;
}

std::vector<std::size_t> brute_force_topk(std::span<const double> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

unsigned __int128 exact_layer_flops(std::uint64_t n, std::uint64_t d, std::uint64_t m, std::uint64_t layers) {
    using u128 = unsigned __int128;
    const u128 N = n;
    const u128 D = d;
    const u128 M = m;
    return static_cast<u128>(layers) * (4 * N * D * D + 2 * N * N * D + 2 * N * D * M);
}

long double exact_reduction_ratio(std::uint64_t n, std::uint64_t kept, std::uint64_t d, std::uint64_t m) {
    using u128 = unsigned __int128;
    // gamma N = kept exactly, so the numerator is an integer.
    const u128 num = 8 * u128(kept) * d * d + 4 * u128(kept) * kept * d + 6 * u128(kept) * d * m;
    const u128 den = 8 * u128(n) * d * d + 4 * u128(n) * n * d + 6 * u128(n) * d * m;
    return 1.0L - static_cast<long double>(num) / static_cast<long double>(den);
}

FrameOracle brute_force_frame_cluster(const std::vector<Tensor>& frames, std::size_t keep) {
    const std::size_t count = frames.size();
    auto pooled = [&](std::size_t f) {
        std::vector<double> p(frames[f].cols(), 0.0);
        for (std::size_t t = 0; t < frames[f].rows(); ++t) {
            for (std::size_t c = 0; c < p.size(); ++c) {
                p[c] += frames[f].at(t, c);
            }
        }
        for (double& x : p) {
            x /= static_cast<double>(frames[f].rows());
        }
        return p;
    };
    auto cos = [](const std::vector<double>& a, const std::vector<double>& b) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t c = 0; c < a.size(); ++c) {
            ab += a[c] * b[c];
            aa += a[c] * a[c];
            bb += b[c] * b[c];
        }
        return (aa == 0 || bb == 0) ? 0.0 : ab / (std::sqrt(aa) * std::sqrt(bb));
    };

    FrameOracle out;
    std::vector<std::vector<double>> pools;
    for (std::size_t f = 0; f < count; ++f) {
        pools.push_back(pooled(f));
    }
    for (std::size_t i = 0; i < count; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < count; ++j) {
            if (i != j) {
                s += cos(pools[i], pools[j]);
            }
        }
        out.similarity.push_back(count > 1 ? s / static_cast<double>(count - 1) : 0.0);
    }
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.similarity[a] < out.similarity[b]; });
    out.centers.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(out.centers.begin(), out.centers.end());

    out.assignment.resize(count);
    for (std::size_t f = 0; f < count; ++f) {
        auto it = std::find(out.centers.begin(), out.centers.end(), f);
        if (it != out.centers.end()) {
            out.assignment[f] = static_cast<std::size_t>(it - out.centers.begin());
            continue;
        }
        std::size_t best = 0;
        for (std::size_t s = 1; s < keep; ++s) {
            if (cos(pools[f], pools[out.centers[s]]) > cos(pools[f], pools[out.centers[best]])) {
                best = s;
            }
        }
        out.assignment[f] = best;
    }

    for (std::size_t s = 0; s < keep; ++s) {
        const Tensor& center = frames[out.centers[s]];
        std::vector<std::vector<double>> sums;
        std::vector<std::vector<double>> originals;
        for (std::size_t t = 0; t < center.rows(); ++t) {
            auto row = center.row(t);
            originals.emplace_back(row.begin(), row.end());
        }
        sums = originals;
        std::vector<double> counts(center.rows(), 1.0);
        for (std::size_t f = 0; f < count; ++f) {
            if (f == out.centers[s] || out.assignment[f] != s ||
                std::find(out.centers.begin(), out.centers.end(), f) != out.centers.end()) {
                continue;
            }
            for (std::size_t t = 0; t < frames[f].rows(); ++t) {
                auto row = frames[f].row(t);
                std::vector<double> tok(row.begin(), row.end());
                std::size_t nn = 0;
                for (std::size_t u = 1; u < originals.size(); ++u) {
                    if (cos(tok, originals[u]) > cos(tok, originals[nn])) {
                        nn = u;
                    }
                }
                for (std::size_t c = 0; c < tok.size(); ++c) {
                    sums[nn][c] += tok[c];
                }
                counts[nn] += 1.0;
            }
        }
        Tensor merged({center.rows(), center.cols()});
        for (std::size_t t = 0; t < center.rows(); ++t) {
            for (std::size_t c = 0; c < center.cols(); ++c) {
                merged.at(t, c) = static_cast<float>(sums[t][c] / counts[t]);
            }
        }
        out.merged.push_back(std::move(merged));
    }
    return out;
}

FuzzCase make_case(std::uint64_t seed, const FuzzEnvelope& envelope) {
    Rng rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
    FuzzCase c;
    c.seed = seed;
    c.grid_h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(envelope.max_grid)));
    c.grid_w = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(envelope.max_grid)));
    c.dim = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(envelope.max_dim)));
    c.text_len = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(envelope.max_text)));
    c.heads = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(envelope.max_heads)));
    const std::size_t kernels[] = {1, 3, 3, 3, 5};
    c.kernel = kernels[rng.uniform_int(0, 4)];
    return c;
}

std::string describe(const FuzzCase& c) {
    std::ostringstream os;
    os << "seed=" << c.seed << " grid=" << c.grid_h << "x" << c.grid_w << " d=" << c.dim << " L=" << c.text_len
       << " H=" << c.heads << " k=" << c.kernel;
    return os.str();
}

std::string repro_command(int criterion, std::uint64_t seed) {
    std::ostringstream os;
    os << "acceptance_tests --criterion " << criterion << " --seed " << seed;
    return os.str();
}

}  // namespace visiontrim::oracle
