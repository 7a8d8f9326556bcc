// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace visiontrim {

/// Bad shapes, out-of-range budgets, non-finite values, malformed configs.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The file could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FormatErrorCode {
    bad_magic,
    unsupported_version,
    unsupported_dtype,
    bad_rank,
    payload_length_mismatch,
    non_finite_payload,
};

const char* to_string(FormatErrorCode code);

/// A VTTF file parsed but its content is not a valid tensor.
class TensorFormatError : public ValidationError {
public:
    TensorFormatError(FormatErrorCode code, const std::string& what)
        : ValidationError(what), m_code(code) {}

    FormatErrorCode code() const noexcept {
        return m_code;
    }

private:
    FormatErrorCode m_code;
};

}  // namespace visiontrim
