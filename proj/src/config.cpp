// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "visiontrim/error.hpp"

namespace visiontrim {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw ValidationError("config: " + where + " must be an object");
    }
    for (const auto& item : obj.items()) {
        if (!allowed.contains(item.key())) {
            throw ValidationError("config: unknown key \"" + where + item.key() + "\"");
        }
    }
}

std::size_t get_count(const json& v, const std::string& key, std::size_t min_value) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < static_cast<std::int64_t>(min_value)) {
        throw ValidationError("config: \"" + key + "\" must be an integer >= " + std::to_string(min_value));
    }
    return v.get<std::size_t>();
}

double get_number(const json& v, const std::string& key) {
    if (!v.is_number()) {
        throw ValidationError("config: \"" + key + "\" must be a number");
    }
    return v.get<double>();
}

bool get_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) {
        throw ValidationError("config: \"" + key + "\" must be a boolean");
    }
    return v.get<bool>();
}

}  // namespace

void apply_config(const json& doc, RunConfig& config) {
    reject_unknown(doc,
                   {"retain", "ratio", "tgvc_enabled", "tgvc_iterations", "ltam", "cross_modal_axis",
                    "swap_fusion_weight", "seed", "stage1_retain_rate", "stage2_retain_rate", "vision_layer",
                    "llm_layer", "video"},
                   "");
    BudgetPlan& plan = config.plan;
    if (doc.contains("retain")) {
        plan.retain = get_count(doc["retain"], "retain", 1);
    }
    if (doc.contains("ratio")) {
        const auto& r = doc["ratio"];
        if (!r.is_array() || r.size() != 2) {
            throw ValidationError("config: \"ratio\" must be a two-element array [dvts, tgvc]");
        }
        plan.ratio = {get_count(r[0], "ratio[0]", 1), get_count(r[1], "ratio[1]", 1)};
    }
    if (doc.contains("tgvc_enabled")) {
        plan.tgvc_enabled = get_bool(doc["tgvc_enabled"], "tgvc_enabled");
    }
    if (doc.contains("tgvc_iterations")) {
        plan.tgvc_iterations = get_count(doc["tgvc_iterations"], "tgvc_iterations", 1);
    }
    if (doc.contains("ltam")) {
        const auto& l = doc["ltam"];
        reject_unknown(l, {"kernel_size", "weights", "sigma_floor"}, "ltam.");
        if (l.contains("kernel_size")) {
            plan.ltam.kernel_size = get_count(l["kernel_size"], "ltam.kernel_size", 1);
        }
        if (l.contains("weights")) {
            const auto& w = l["weights"];
            if (!w.is_array() || w.size() != 3) {
                throw ValidationError("config: \"ltam.weights\" must be [w1, w2, w3]");
            }
            plan.ltam.w1 = get_number(w[0], "ltam.weights[0]");
            plan.ltam.w2 = get_number(w[1], "ltam.weights[1]");
            plan.ltam.w3 = get_number(w[2], "ltam.weights[2]");
        }
        if (l.contains("sigma_floor")) {
            plan.ltam.sigma_floor = get_number(l["sigma_floor"], "ltam.sigma_floor");
        }
        plan.ltam.validate();
    }
    if (doc.contains("cross_modal_axis")) {
        if (!doc["cross_modal_axis"].is_string()) {
            throw ValidationError("config: \"cross_modal_axis\" must be a string");
        }
        plan.cross_modal_axis = parse_cross_modal_axis(doc["cross_modal_axis"].get<std::string>());
    }
    if (doc.contains("swap_fusion_weight")) {
        plan.swap_fusion_weight = get_bool(doc["swap_fusion_weight"], "swap_fusion_weight");
    }
    if (doc.contains("seed")) {
        const auto& seed = doc["seed"];
        if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
            throw ValidationError("config: \"seed\" must be a nonnegative integer");
        }
        config.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("stage1_retain_rate")) {
        const double rate = get_number(doc["stage1_retain_rate"], "stage1_retain_rate");
        if (!(rate > 0.0 && rate <= 1.0)) {
            throw ValidationError("config: \"stage1_retain_rate\" must lie in (0, 1]");
        }
        plan.stage1_retain_rate = rate;
    }
    if (doc.contains("stage2_retain_rate")) {
        const auto& v = doc["stage2_retain_rate"];
        if (v.is_null()) {
            plan.stage2_retain_rate.reset();
        } else {
            const double rate = get_number(v, "stage2_retain_rate");
            if (!(rate >= 0.0 && rate <= 1.0)) {
                throw ValidationError("config: \"stage2_retain_rate\" must lie in [0, 1]");
            }
            plan.stage2_retain_rate = rate;
        }
    }
    if (doc.contains("vision_layer")) {
        plan.vision_layer = get_count(doc["vision_layer"], "vision_layer", 0);
    }
    if (doc.contains("llm_layer")) {
        plan.llm_layer = get_count(doc["llm_layer"], "llm_layer", 0);
    }
    if (doc.contains("video")) {
        const auto& v = doc["video"];
        reject_unknown(v, {"keep_frames", "tokens_per_frame"}, "video.");
        if (v.contains("keep_frames")) {
            config.video.keep_frames = get_count(v["keep_frames"], "video.keep_frames", 1);
        }
        if (v.contains("tokens_per_frame")) {
            config.video.tokens_per_frame = get_count(v["tokens_per_frame"], "video.tokens_per_frame", 1);
        }
    }
}

void apply_config_file(const std::filesystem::path& path, RunConfig& config) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
        apply_config(doc, config);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

json to_json(const RunConfig& config) {
    const BudgetPlan& plan = config.plan;
    json out;
    out["retain"] = plan.retain;
    out["ratio"] = {plan.ratio.dominant, plan.ratio.complement};
    out["tgvc_enabled"] = plan.tgvc_enabled;
    out["tgvc_iterations"] = plan.tgvc_iterations;
    out["ltam"] = {{"kernel_size", plan.ltam.kernel_size},
                   {"weights", {plan.ltam.w1, plan.ltam.w2, plan.ltam.w3}},
                   {"sigma_floor", plan.ltam.sigma_floor}};
    out["cross_modal_axis"] = std::string(to_string(plan.cross_modal_axis));
    out["swap_fusion_weight"] = plan.swap_fusion_weight;
    out["seed"] = config.seed;
    out["stage1_retain_rate"] = plan.stage1_retain_rate;
    out["stage2_retain_rate"] = plan.stage2_retain_rate ? json(*plan.stage2_retain_rate) : json(nullptr);
    out["vision_layer"] = plan.vision_layer;
    out["llm_layer"] = plan.llm_layer;
    out["video"] = {{"keep_frames", config.video.keep_frames}, {"tokens_per_frame", config.video.tokens_per_frame}};
    return out;
}

}  // namespace visiontrim
