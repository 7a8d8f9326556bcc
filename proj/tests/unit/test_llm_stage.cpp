// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "visiontrim/error.hpp"
#include "visiontrim/llm_stage.hpp"
#include "visiontrim/tgvc.hpp"

using namespace visiontrim;

namespace {

DecoderHiddenStates random_states(std::uint64_t seed, std::size_t nv, std::size_t nt, std::size_t d) {
    Rng rng(seed);
    DecoderHiddenStates s;
    s.h_gen = rng.uniform_tensor({1, d}, -2.0, 2.0);
    s.h_v = rng.uniform_tensor({nv, d}, -2.0, 2.0);
    s.h_t = rng.uniform_tensor({nt, d}, -2.0, 2.0);
    return s;
}

}  // namespace

TEST_CASE("gen token scores") {
    DecoderHiddenStates same{Tensor::from_rows({{1.0f, 2.0f}}), Tensor::from_rows({{0.5f, 1.0f}, {0.5f, 1.0f}}),
                             Tensor::from_rows({{1.0f, 1.0f}})};
    auto u = llm_stage::gen_token_scores(same);
    CHECK(u[0] == doctest::Approx(0.5));
    CHECK(u[1] == doctest::Approx(0.5));

    DecoderHiddenStates one{Tensor::from_rows({{3.0f}}), Tensor::from_rows({{-7.0f}}), Tensor::from_rows({{1.0f}})};
    CHECK(llm_stage::gen_token_scores(one)[0] == 1.0);

    DecoderHiddenStates worked{Tensor::from_rows({{1.0f}}), Tensor::from_rows({{1.0f}, {-1.0f}}),
                               Tensor::from_rows({{1.0f}})};
    auto w = llm_stage::gen_token_scores(worked);
    CHECK(std::abs(w[0] - 0.88080) < 1e-4);
    CHECK(std::abs(w[1] - 0.11920) < 1e-4);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto g = llm_stage::gen_token_scores(random_states(seed, 3 + seed, 2, 5));
        CHECK(std::abs(std::accumulate(g.values.begin(), g.values.end(), 0.0) - 1.0) < 1e-6);
    }

    DecoderHiddenStates wide{Tensor::from_rows({{1.0f}, {2.0f}}), Tensor::from_rows({{1.0f}}),
                             Tensor::from_rows({{1.0f}})};
    CHECK_THROWS_AS(llm_stage::gen_token_scores(wide), ValidationError);
    DecoderHiddenStates mixed{Tensor::from_rows({{1.0f}}), Tensor::from_rows({{1.0f, 0.0f}}),
                              Tensor::from_rows({{1.0f}})};
    CHECK_THROWS_AS(llm_stage::gen_token_scores(mixed), ValidationError);
}

TEST_CASE("cross modal scores on the text axis are exactly 1 / N_t") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const std::size_t nt = 1 + seed % 9;
        auto s = random_states(seed, 1 + seed % 13, nt, 1 + seed % 7);
        for (double a : llm_stage::cross_modal_scores(s)) {
            CHECK(a == 1.0 / static_cast<double>(nt));
        }
    }
}

TEST_CASE("cross modal scores on the visual axis") {
    DecoderHiddenStates s{Tensor::from_rows({{1.0f}}), Tensor::from_rows({{1.0f}, {-1.0f}}),
                          Tensor::from_rows({{1.0f}})};
    auto a = llm_stage::cross_modal_scores(s, CrossModalAxis::visual);
    CHECK(std::abs(a[0] - 0.88080) < 1e-4);
    CHECK(std::abs(a[1] - 0.11920) < 1e-4);

    DecoderHiddenStates single{Tensor::from_rows({{1.0f}}), Tensor::from_rows({{4.0f}}),
                               Tensor::from_rows({{1.0f}, {-3.0f}})};
    CHECK(llm_stage::cross_modal_scores(single, CrossModalAxis::visual)[0] == 1.0);
    CHECK(llm_stage::cross_modal_scores(single, CrossModalAxis::text)[0] == 0.5);
    DecoderHiddenStates lone{Tensor::from_rows({{1.0f}}), Tensor::from_rows({{4.0f}}), Tensor::from_rows({{2.0f}})};
    CHECK(llm_stage::cross_modal_scores(lone, CrossModalAxis::text)[0] == 1.0);

    CHECK(parse_cross_modal_axis("visual") == CrossModalAxis::visual);
    CHECK(to_string(CrossModalAxis::text) == "text");
    CHECK_THROWS_AS(parse_cross_modal_axis("rows"), ValidationError);
}

TEST_CASE("stage 2 with the full budget keeps every visual state once") {
    auto s = random_states(8, 6, 3, 4);
    auto out = llm_stage::stage2_prune(s, std::nullopt, 4, 2);
    CHECK(out.tokens.rows() == 6);
    CHECK(out.members.empty());
    std::vector<std::size_t> src = out.source;
    std::sort(src.begin(), src.end());
    CHECK(src == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(out.tokens.at(i, c) == s.h_v.at(out.source[i], c));
        }
    }
}

TEST_CASE("stage 2 equals the hand composition") {
    auto s = random_states(1234, 4, 3, 6);
    auto out = llm_stage::stage2_prune(s, std::nullopt, 2, 1);

    const auto gen = llm_stage::gen_token_scores(s);
    const auto dominant = dvts::select_dominant(gen, 2);
    std::vector<std::size_t> remaining;
    for (std::size_t i = 0; i < 4; ++i) {
        if (std::find(dominant.begin(), dominant.end(), i) == dominant.end()) {
            remaining.push_back(i);
        }
    }
    // Text-axis scores are constant, so the visual axis picks the center.
    const auto visual = llm_stage::cross_modal_scores(s, CrossModalAxis::visual);
    std::vector<double> center_scores;
    double sum = 0.0;
    for (std::size_t i : remaining) {
        center_scores.push_back(visual[i]);
        sum += visual[i];
    }
    for (double& v : center_scores) {
        v /= sum;
    }
    const Tensor rem = Tensor::gather_rows(s.h_v, remaining);
    const auto centers = tgvc::pick_centers(center_scores, 1);
    const auto state = tgvc::assign_tokens(rem, s.h_t, centers);
    const Tensor com = tgvc::aggregate_clusters(state, rem, s.h_t);
    const auto expected = tgvc::compose_final(Tensor::gather_rows(s.h_v, dominant), com);

    CHECK(out.dominant == dominant);
    CHECK(out.centers == std::vector<std::size_t>{remaining[centers[0]]});
    CHECK(out.center_score_source == "cross_modal:visual");
    CHECK(out.tokens == expected.final_tokens);
    CHECK(out.provenance == expected.provenance);
}

TEST_CASE("stage 2 without grid metadata is top-K of the generated-token scores") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const std::size_t nv = 4 + seed % 20;
        auto s = random_states(seed, nv, 2 + seed % 5, 8);
        const std::size_t k = 1 + seed % (nv - 1);
        auto out = llm_stage::stage2_prune(s, std::nullopt, k, 1);
        CHECK(out.dominant == dvts::select_dominant(llm_stage::gen_token_scores(s), k));
        CHECK(out.tokens.rows() == k + 1);
        CHECK(out.local.size() == 0);
    }
}

TEST_CASE("stage 2 with survivor positions fuses LTAM") {
    auto s = random_states(55, 6, 2, 4);
    StageLtam ltam{s.h_v, {{0, 0}, {0, 2}, {1, 1}, {2, 0}, {2, 2}, {3, 1}}, TokenGrid{4, 3}, LtamParams{}};
    auto out = llm_stage::stage2_prune(s, ltam, 3, 1);
    CHECK(out.local.size() == 6);
    CHECK(out.alpha >= 0.0);
    CHECK(out.alpha <= 1.0);
    CHECK(out.positions.size() == 4);
    CHECK(out.dominant == dvts::select_dominant(out.fused, 3));

    Stage2Options swapped;
    swapped.swap_fusion_weight = true;
    auto other = llm_stage::stage2_prune(s, ltam, 3, 1, swapped);
    CHECK(std::abs(other.alpha - (1.0 - out.alpha)) < 1e-12);

    StageLtam short_ltam = ltam;
    short_ltam.positions.pop_back();
    CHECK_THROWS_AS(llm_stage::stage2_prune(s, short_ltam, 3, 1), ValidationError);
}

TEST_CASE("stage 2 budget validation") {
    auto s = random_states(3, 4, 2, 3);
    CHECK_THROWS_AS(llm_stage::stage2_prune(s, std::nullopt, 4, 1), ValidationError);
    CHECK_THROWS_AS(llm_stage::stage2_prune(s, std::nullopt, 0, 1), ValidationError);
    CHECK(llm_stage::stage2_prune(s, std::nullopt, 4, 0).tokens.rows() == 4);
}
