// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "visiontrim/config.hpp"
#include "visiontrim/efficiency.hpp"
#include "visiontrim/error.hpp"
#include "visiontrim/llm_stage.hpp"
#include "visiontrim/pipeline.hpp"
#include "visiontrim/tensor.hpp"

namespace visiontrim::cli {

using nlohmann::json;
namespace fs = std::filesystem;

TokenGrid parse_grid(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos || x == 0 || x + 1 == text.size()) {
        throw ValidationError("grid must look like HxW, got \"" + text + "\"");
    }
    try {
        std::size_t used_h = 0;
        std::size_t used_w = 0;
        const auto h = std::stoul(text.substr(0, x), &used_h);
        const auto w = std::stoul(text.substr(x + 1), &used_w);
        if (used_h != x || used_w != text.size() - x - 1 || h == 0 || w == 0) {
            throw std::invalid_argument(text);
        }
        return {h, w};
    } catch (const std::logic_error&) {
        throw ValidationError("grid must look like HxW with positive integers, got \"" + text + "\"");
    }
}

std::string render_mask(const SelectionResult& selection) {
    if (!selection.grid) {
        throw ValidationError("mask needs grid metadata");
    }
    const TokenGrid grid = *selection.grid;
    std::string pixels(grid.size(), '\0');
    auto paint = [&](std::size_t token, unsigned char value) {
        const GridPos p = grid.position(token);
        pixels[p.x * grid.width + p.y] = static_cast<char>(value);
    };
    for (std::size_t t : selection.centers) {
        paint(t, 128);
    }
    for (std::size_t t : selection.members) {
        paint(t, 128);
    }
    for (std::size_t t : selection.dominant) {
        paint(t, 255);
    }
    return "P5\n" + std::to_string(grid.width) + " " + std::to_string(grid.height) + "\n255\n" + pixels;
}

json selection_to_json(const SelectionResult& s) {
    json out;
    out["K"] = s.num_dominant();
    out["R"] = s.num_complement();
    out["input_count"] = s.input_count;
    out["alpha"] = s.alpha;
    out["dominant"] = s.dominant;
    out["centers"] = s.centers;
    out["members"] = s.members;
    out["member_labels"] = s.member_labels;
    out["source"] = s.source;
    json provenance = json::array();
    for (Provenance p : s.provenance) {
        provenance.push_back(std::string(to_string(p)));
    }
    out["provenance"] = provenance;
    json positions = json::array();
    for (const GridPos& p : s.positions) {
        positions.push_back({p.x, p.y});
    }
    out["positions"] = positions;
    out["scores"] = {{"global", s.global.values},
                     {"local", s.local.values},
                     {"fused", s.fused.values},
                     {"center", s.center_scores}};
    out["center_score_source"] = s.center_score_source;
    return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string dump(const json& doc) {
    return doc.dump(2) + "\n";
}

TokenGrid grid_for(const std::optional<std::string>& flag, std::size_t tokens) {
    if (flag) {
        const TokenGrid grid = parse_grid(*flag);
        if (grid.size() != tokens) {
            throw ValidationError("grid " + *flag + " does not hold " + std::to_string(tokens) + " tokens");
        }
        return grid;
    }
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(tokens))));
    if (side * side != tokens) {
        throw ValidationError("--grid is required: " + std::to_string(tokens) + " tokens do not form a square");
    }
    return {side, side};
}

Tensor load_matrix(const std::string& path, const char* what) {
    Tensor t = load_tensor(path);
    if (t.rank() != 2) {
        throw ValidationError(path + ": " + what + " must be a matrix, got " + t.shape_string());
    }
    return t;
}

Ratio parse_ratio(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ValidationError("ratio must look like a:b, got \"" + text + "\"");
    }
    try {
        std::size_t used_a = 0;
        std::size_t used_b = 0;
        const auto a = std::stoul(text.substr(0, colon), &used_a);
        const auto b = std::stoul(text.substr(colon + 1), &used_b);
        if (used_a != colon || used_b != text.size() - colon - 1) {
            throw std::invalid_argument(text);
        }
        return {a, b};
    } catch (const std::logic_error&) {
        throw ValidationError("ratio must look like a:b with integers, got \"" + text + "\"");
    }
}

// ---------------------------------------------------------------------------

struct PruneArgs {
    std::string features;
    std::string cls_attn;
    std::string text;
    std::optional<std::string> grid;
    std::optional<std::size_t> retain;
    std::optional<std::string> config;
    std::string out;
    std::optional<std::string> indices_out;
    std::optional<std::string> mask_out;
    std::optional<std::string> stage2_gen;
    std::optional<std::string> stage2_visual;
    std::optional<std::string> stage2_text;
};

RunConfig resolve_config(const std::optional<std::size_t>& retain, const std::optional<std::string>& config_path) {
    RunConfig config;
    if (retain) {
        config.plan.retain = *retain;
    }
    if (config_path) {
        apply_config_file(*config_path, config);
    }
    return config;
}

int cmd_prune(const PruneArgs& a, std::ostream& out) {
    const Tensor features = load_matrix(a.features, "features");
    ClsAttention cls;
    {
        Tensor raw = load_matrix(a.cls_attn, "CLS attention");
        try {
            cls = ClsAttention::from_tensor(std::move(raw));
        } catch (const ValidationError& e) {
            throw ValidationError(a.cls_attn + ": " + e.what());
        }
    }
    const Tensor text = load_matrix(a.text, "text features");
    const TokenGrid grid = grid_for(a.grid, features.rows());

    RunConfig config = resolve_config(a.retain, a.config);
    if (config.plan.retain == 0) {
        throw ValidationError("a positive --retain (or config \"retain\") is required");
    }
    config.plan.total_tokens = features.rows();

    const int stage2_inputs = (a.stage2_gen ? 1 : 0) + (a.stage2_visual ? 1 : 0) + (a.stage2_text ? 1 : 0);
    if (stage2_inputs != 0 && stage2_inputs != 3) {
        throw ValidationError("--stage2-gen, --stage2-visual and --stage2-text go together");
    }
    const bool two_stage = stage2_inputs == 3;

    const std::size_t first_retain = stage1_retain(config.plan, two_stage);
    SelectionResult stage1 = pipeline::run_vision_stage(features, cls, grid, text, config.plan, first_retain);

    json report;
    report["config"] = to_json(config);
    report["input"] = {{"tokens", features.rows()}, {"dim", features.cols()}, {"grid", {grid.height, grid.width}}};
    report["stage1"] = selection_to_json(stage1);
    json warnings = json::array();

    const Tensor* final_tokens = &stage1.tokens;
    std::optional<pipeline::LlmStageReport> stage2;
    if (two_stage) {
        DecoderHiddenStates states{load_matrix(*a.stage2_gen, "h_gen"), load_matrix(*a.stage2_visual, "h_v"),
                                   load_matrix(*a.stage2_text, "h_t")};
        stage2 = pipeline::run_llm_stage(stage1, states, config.plan);
        report["stage2"] = selection_to_json(stage2->selection);
        for (const auto& w : stage2->warnings) {
            warnings.push_back(w);
        }
        final_tokens = &stage2->selection.tokens;
    }
    report["warnings"] = warnings;
    report["output_dims"] = final_tokens->dims();

    save_tensor(*final_tokens, a.out);
    if (a.indices_out) {
        write_text(*a.indices_out, dump(report));
    }
    if (a.mask_out) {
        write_text(*a.mask_out, render_mask(stage1));
    }
    out << dump({{"output", a.out}, {"output_dims", final_tokens->dims()}, {"warnings", warnings}});
    return kExitOk;
}

struct VideoArgs {
    std::string features;
    std::string cls_attn;
    std::string text;
    std::optional<std::string> grid;
    std::optional<std::size_t> keep_frames;
    std::optional<std::size_t> tokens_per_frame;
    std::optional<std::string> config;
    std::string out;
    std::optional<std::string> indices_out;
};

int cmd_video(const VideoArgs& a, std::ostream& out) {
    const Tensor features = load_tensor(a.features);
    if (features.rank() != 3) {
        throw ValidationError(a.features + ": video features must be F x N x d, got " + features.shape_string());
    }
    const Tensor cls = load_tensor(a.cls_attn);
    const Tensor text = load_matrix(a.text, "text features");
    const TokenGrid grid = grid_for(a.grid, features.dim(1));

    RunConfig config;
    if (a.keep_frames) {
        config.video.keep_frames = *a.keep_frames;
    }
    if (a.tokens_per_frame) {
        config.video.tokens_per_frame = *a.tokens_per_frame;
    }
    if (a.config) {
        apply_config_file(*a.config, config);
    }
    config.plan.total_tokens = features.dim(1);
    config.plan.retain = config.video.tokens_per_frame;

    const VideoResult result =
        run_video(FrameSet::from_tensor(features), cls, grid, text, config.plan, config.video);
    save_tensor(result.tokens, a.out);

    json report;
    report["config"] = to_json(config);
    report["similarity"] = result.clustering.similarity;
    report["center_frames"] = result.clustering.centers;
    report["assignment"] = result.clustering.assignment;
    json frames = json::array();
    for (const auto& s : result.per_frame) {
        frames.push_back(selection_to_json(s));
    }
    report["frames"] = frames;
    report["output_dims"] = result.tokens.dims();
    if (a.indices_out) {
        write_text(*a.indices_out, dump(report));
    }
    out << dump({{"output", a.out}, {"output_dims", result.tokens.dims()}});
    return kExitOk;
}

int cmd_plan(std::size_t total, std::size_t retain, const std::string& ratio, std::ostream& out) {
    const StageBudget b = plan_budget(total, retain, parse_ratio(ratio));
    out << json{{"K", b.k}, {"R", b.r}}.dump() << "\n";
    return kExitOk;
}

struct FlopsArgs {
    std::uint64_t tokens = 0;
    std::uint64_t hidden = 0;
    std::uint64_t ffn = 0;
    std::uint64_t layers = 0;
    double retain_fraction = 1.0;
    std::uint64_t kv_bytes = 2;
    bool mib = false;
    std::optional<double> stage1_fraction;
    std::optional<std::uint64_t> llm_layer;
};

int cmd_flops(const FlopsArgs& a, std::ostream& out) {
    CostProfile profile{a.tokens, a.hidden, a.ffn, a.layers, a.kv_bytes, a.retain_fraction};
    profile.validate();
    const std::uint64_t kept = efficiency::retained_tokens(a.tokens, a.retain_fraction);
    const std::uint64_t kv = efficiency::kv_cache_bytes(kept, a.hidden, a.layers, a.kv_bytes);
    const std::uint64_t kv_base = efficiency::kv_cache_bytes(a.tokens, a.hidden, a.layers, a.kv_bytes);

    json report;
    report["inputs"] = {{"tokens", a.tokens},
                        {"hidden", a.hidden},
                        {"ffn", a.ffn},
                        {"layers", a.layers},
                        {"retain_fraction", a.retain_fraction},
                        {"kv_bytes_per_element", a.kv_bytes},
                        {"units", a.mib ? "MiB" : "MB"}};
    report["retained_tokens"] = kept;
    report["flops_baseline"] = efficiency::layer_flops(a.tokens, a.hidden, a.ffn, a.layers);
    report["flops_total"] = efficiency::layer_flops(kept, a.hidden, a.ffn, a.layers);
    report["reduction_ratio"] = efficiency::reduction_ratio(a.tokens, a.hidden, a.ffn, a.retain_fraction);
    report["kv_bytes"] = kv;
    report["kv_bytes_baseline"] = kv_base;
    report["kv_mb"] = a.mib ? efficiency::to_mebibytes(kv) : efficiency::to_megabytes(kv);
    report["kv_mb_baseline"] = a.mib ? efficiency::to_mebibytes(kv_base) : efficiency::to_megabytes(kv_base);
    if (a.stage1_fraction || a.llm_layer) {
        if (!(a.stage1_fraction && a.llm_layer)) {
            throw ValidationError("--stage1-fraction and --llm-layer go together");
        }
        const std::uint64_t stage1 = efficiency::retained_tokens(a.tokens, *a.stage1_fraction);
        if (stage1 < kept) {
            throw ValidationError("stage-1 fraction keeps fewer tokens than the final retain fraction");
        }
        report["inputs"]["stage1_fraction"] = *a.stage1_fraction;
        report["inputs"]["llm_layer"] = *a.llm_layer;
        report["flops_two_stage"] =
            efficiency::pipeline_flops(stage1, stage1, kept, 0, *a.llm_layer, a.hidden, a.ffn, a.layers);
    }
    out << dump(report);
    return kExitOk;
}

struct SynthArgs {
    std::uint64_t seed = 0;
    std::size_t tokens = 576;
    std::size_t dim = 64;
    std::size_t heads = 16;
    std::size_t text_len = 8;
    std::optional<std::string> grid;
    std::size_t frames = 0;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    if (a.tokens == 0 || a.dim == 0 || a.heads == 0 || a.text_len == 0) {
        throw ValidationError("synth: tokens, dim, heads and text-len must be positive");
    }
    const TokenGrid grid = grid_for(a.grid, a.tokens);
    std::error_code ec;
    fs::create_directories(a.out_dir, ec);
    if (ec) {
        throw IoError("cannot create " + a.out_dir + ": " + ec.message());
    }

    Rng rng(a.seed);
    const std::size_t frames = a.frames;
    const std::size_t slices = frames == 0 ? 1 : frames;
    std::vector<float> feature_data;
    std::vector<float> attn_data;
    for (std::size_t f = 0; f < slices; ++f) {
        const Tensor feats = rng.uniform_tensor({a.tokens, a.dim});
        const Tensor attn = row_softmax(rng.uniform_tensor({a.heads, a.tokens}, -4.0, 4.0));
        feature_data.insert(feature_data.end(), feats.data().begin(), feats.data().end());
        attn_data.insert(attn_data.end(), attn.data().begin(), attn.data().end());
    }
    const Tensor text = rng.uniform_tensor({a.text_len, a.dim});

    const fs::path dir(a.out_dir);
    if (frames == 0) {
        save_tensor(Tensor({a.tokens, a.dim}, std::move(feature_data)), dir / "features.vttf");
        save_tensor(Tensor({a.heads, a.tokens}, std::move(attn_data)), dir / "cls_attn.vttf");
    } else {
        save_tensor(Tensor({frames, a.tokens, a.dim}, std::move(feature_data)), dir / "features.vttf");
        save_tensor(Tensor({frames, a.heads, a.tokens}, std::move(attn_data)), dir / "cls_attn.vttf");
    }
    save_tensor(text, dir / "text.vttf");

    json manifest = {{"seed", a.seed},
                     {"tokens", a.tokens},
                     {"dim", a.dim},
                     {"heads", a.heads},
                     {"text_len", a.text_len},
                     {"grid", {grid.height, grid.width}},
                     {"frames", frames},
                     {"files", {"cls_attn.vttf", "features.vttf", "text.vttf"}}};
    write_text(dir / "manifest.json", dump(manifest));
    out << dump({{"out_dir", a.out_dir}, {"files", manifest["files"]}});
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"visiontrim: visual token pruning on serialized tensors", "visiontrim"};
    app.require_subcommand(1);

    PruneArgs prune;
    auto* p = app.add_subcommand("prune", "Prune one image's visual tokens (DVTS + TGVC, optional decoder stage)");
    p->add_option("--features", prune.features, "N x d visual token features (VTTF)")->required();
    p->add_option("--cls-attn", prune.cls_attn, "H x N [CLS] attention rows (VTTF)")->required();
    p->add_option("--text", prune.text, "L x d text features (VTTF)")->required();
    p->add_option("--grid", prune.grid, "Token grid HxW (default: square)");
    p->add_option("--retain", prune.retain, "Tokens to keep end to end");
    p->add_option("--config", prune.config, "JSON run config (wins over flags)");
    p->add_option("--out", prune.out, "Output tokens (VTTF)")->required();
    p->add_option("--indices-out", prune.indices_out, "Selection report (JSON)");
    p->add_option("--mask-out", prune.mask_out, "Provenance mask (PGM)");
    p->add_option("--stage2-gen", prune.stage2_gen, "1 x D decoder state of the first generated token (VTTF)");
    p->add_option("--stage2-visual", prune.stage2_visual, "N_v x D decoder states of the stage-1 survivors (VTTF)");
    p->add_option("--stage2-text", prune.stage2_text, "N_t x D decoder states of the text tokens (VTTF)");

    VideoArgs video;
    auto* v = app.add_subcommand("video", "Inter-frame clustering plus per-frame pruning");
    v->add_option("--features", video.features, "F x N x d frame token features (VTTF)")->required();
    v->add_option("--cls-attn", video.cls_attn, "F x H x N [CLS] attention (VTTF)")->required();
    v->add_option("--text", video.text, "L x d text features (VTTF)")->required();
    v->add_option("--grid", video.grid, "Per-frame token grid HxW (default: square)");
    v->add_option("--keep-frames", video.keep_frames, "Frames kept as cluster centers");
    v->add_option("--tokens-per-frame", video.tokens_per_frame, "Tokens kept per kept frame");
    v->add_option("--config", video.config, "JSON run config (wins over flags)");
    v->add_option("--out", video.out, "Output tokens (VTTF)")->required();
    v->add_option("--indices-out", video.indices_out, "Selection report (JSON)");

    std::size_t plan_total = 0;
    std::size_t plan_retain = 0;
    std::string plan_ratio = "3:1";
    auto* pl = app.add_subcommand("plan", "Split a token budget between DVTS and TGVC");
    pl->add_option("--total", plan_total, "Visual token count")->required();
    pl->add_option("--retain", plan_retain, "Tokens to keep")->required();
    pl->add_option("--ratio", plan_ratio, "DVTS:TGVC ratio")->capture_default_str();

    FlopsArgs flops;
    auto* fl = app.add_subcommand("flops", "Analytical FLOPs and KV-cache report");
    fl->add_option("--tokens", flops.tokens, "Visual token count n")->required();
    fl->add_option("--hidden", flops.hidden, "Hidden size d")->required();
    fl->add_option("--ffn", flops.ffn, "FFN intermediate size m")->required();
    fl->add_option("--layers", flops.layers, "Decoder layers")->required();
    fl->add_option("--retain-fraction", flops.retain_fraction, "gamma = (K + R) / N")->capture_default_str();
    fl->add_option("--kv-bytes", flops.kv_bytes, "Bytes per cached element")->capture_default_str();
    fl->add_flag("--mib", flops.mib, "Report KV cache in MiB instead of MB");
    fl->add_option("--stage1-fraction", flops.stage1_fraction, "Fraction kept before the decoder");
    fl->add_option("--llm-layer", flops.llm_layer, "Decoder layer of the second pruning point");

    SynthArgs synth;
    auto* sy = app.add_subcommand("synth", "Write a deterministic synthetic fixture");
    sy->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
    sy->add_option("--tokens", synth.tokens, "Visual tokens per image")->capture_default_str();
    sy->add_option("--dim", synth.dim, "Feature width")->capture_default_str();
    sy->add_option("--heads", synth.heads, "Attention heads")->capture_default_str();
    sy->add_option("--text-len", synth.text_len, "Text tokens")->capture_default_str();
    sy->add_option("--grid", synth.grid, "Token grid HxW (default: square)");
    sy->add_option("--frames", synth.frames, "Emit an F-frame video fixture instead of one image");
    sy->add_option("--out-dir", synth.out_dir, "Output directory")->required();

    std::vector<std::string> storage{"visiontrim"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) {
        argv.push_back(s.data());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (p->parsed()) {
            return cmd_prune(prune, out);
        }
        if (v->parsed()) {
            return cmd_video(video, out);
        }
        if (pl->parsed()) {
            return cmd_plan(plan_total, plan_retain, plan_ratio, out);
        }
        if (fl->parsed()) {
            return cmd_flops(flops, out);
        }
        return cmd_synth(synth, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace visiontrim::cli
