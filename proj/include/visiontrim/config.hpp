// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "visiontrim/pipeline.hpp"

namespace visiontrim {

/// Everything a CLI run can be configured with.
struct RunConfig {
    BudgetPlan plan;
    VideoPlan video;
    std::uint64_t seed = 0;
};

/// Overlays the keys present in `doc` onto `config`. Unknown keys, wrong types and
/// out-of-range values throw ValidationError.
void apply_config(const nlohmann::json& doc, RunConfig& config);

/// Reads a JSON config file and overlays it. Missing file: IoError; bad JSON: ValidationError.
void apply_config_file(const std::filesystem::path& path, RunConfig& config);

/// The effective configuration, in the same schema `apply_config` accepts.
nlohmann::json to_json(const RunConfig& config);

}  // namespace visiontrim
