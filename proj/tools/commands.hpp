// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "visiontrim/dvts.hpp"
#include "visiontrim/selection.hpp"

namespace visiontrim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

/// Runs one CLI invocation. `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "HxW" -> grid. Throws ValidationError.
TokenGrid parse_grid(const std::string& text);

/// PGM (P5) bytes of a provenance mask: 255 dominant, 128 merged into a complement, 0 dropped.
std::string render_mask(const SelectionResult& selection);

nlohmann::json selection_to_json(const SelectionResult& selection);

}  // namespace visiontrim::cli
