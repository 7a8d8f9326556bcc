// Copyright (C) 2026 The VisionTrim Authors
// SPDX-License-Identifier: Apache-2.0

#include "visiontrim/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "visiontrim/error.hpp"

namespace visiontrim {

static_assert(std::endian::native == std::endian::little, "VTTF I/O assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

const char* to_string(FormatErrorCode code) {
    switch (code) {
    case FormatErrorCode::bad_magic:
        return "bad magic";
    case FormatErrorCode::unsupported_version:
        return "version mismatch";
    case FormatErrorCode::unsupported_dtype:
        return "unsupported dtype";
    case FormatErrorCode::bad_rank:
        return "bad rank";
    case FormatErrorCode::payload_length_mismatch:
        return "payload length mismatch";
    case FormatErrorCode::non_finite_payload:
        return "non-finite payload";
    }
    return "unknown format error";
}

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
    if (dims.empty() || dims.size() > 3) {
        throw ValidationError("tensor rank must be 1, 2 or 3, got " + std::to_string(dims.size()));
    }
    std::size_t n = 1;
    for (std::size_t d : dims) {
        if (d == 0) {
            throw ValidationError("tensor dims must be positive");
        }
        if (n > std::numeric_limits<std::size_t>::max() / d) {
            throw ValidationError("tensor element count overflows");
        }
        n *= d;
    }
    return n;
}

std::string index_string(const std::vector<std::size_t>& dims, std::size_t flat) {
    std::vector<std::size_t> idx(dims.size());
    for (std::size_t a = dims.size(); a-- > 0;) {
        idx[a] = flat % dims[a];
        flat /= dims[a];
    }
    std::ostringstream os;
    os << '[';
    for (std::size_t a = 0; a < idx.size(); ++a) {
        os << (a ? ", " : "") << idx[a];
    }
    os << ']';
    return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims) : m_dims(std::move(dims)) {
    m_data.assign(checked_product(m_dims), 0.0f);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : m_dims(std::move(dims)), m_data(std::move(data)) {
    const std::size_t n = checked_product(m_dims);
    if (m_data.size() != n) {
        throw ValidationError("tensor data length " + std::to_string(m_data.size()) + " does not match dims " +
                              shape_string());
    }
}

Tensor Tensor::from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw ValidationError("from_rows needs at least one non-empty row");
    }
    const std::size_t cols = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) {
            throw ValidationError("from_rows: ragged rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::gather_rows(const Tensor& source, std::span<const std::size_t> rows) {
    if (rows.empty()) {
        throw ValidationError("gather_rows needs at least one row");
    }
    const std::size_t cols = source.cols();
    std::vector<float> data;
    data.reserve(rows.size() * cols);
    for (std::size_t r : rows) {
        auto src = source.row(r);
        data.insert(data.end(), src.begin(), src.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= m_dims.size()) {
        throw ValidationError("axis " + std::to_string(axis) + " out of range for " + shape_string());
    }
    return m_dims[axis];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) {
        throw ValidationError("expected a rank-2 tensor, got " + shape_string());
    }
    return m_dims[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) {
        throw ValidationError("expected a rank-2 tensor, got " + shape_string());
    }
    return m_dims[1];
}

std::span<const float> Tensor::row(std::size_t i) const {
    const std::size_t c = cols();
    if (i >= m_dims[0]) {
        throw ValidationError("row " + std::to_string(i) + " out of range for " + shape_string());
    }
    return std::span<const float>(m_data).subspan(i * c, c);
}

std::span<float> Tensor::row(std::size_t i) {
    const std::size_t c = cols();
    if (i >= m_dims[0]) {
        throw ValidationError("row " + std::to_string(i) + " out of range for " + shape_string());
    }
    return std::span<float>(m_data).subspan(i * c, c);
}

Tensor Tensor::slice(std::size_t i) const {
    if (rank() != 3) {
        throw ValidationError("slice expects a rank-3 tensor, got " + shape_string());
    }
    if (i >= m_dims[0]) {
        throw ValidationError("slice " + std::to_string(i) + " out of range for " + shape_string());
    }
    const std::size_t stride = m_dims[1] * m_dims[2];
    auto first = m_data.begin() + static_cast<std::ptrdiff_t>(i * stride);
    return Tensor({m_dims[1], m_dims[2]}, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

float Tensor::at(std::size_t i, std::size_t j) const {
    return row(i)[j];
}

float& Tensor::at(std::size_t i, std::size_t j) {
    return row(i)[j];
}

void Tensor::require_finite(const std::string& what) const {
    for (std::size_t k = 0; k < m_data.size(); ++k) {
        if (!std::isfinite(m_data[k])) {
            throw ValidationError(what + ": non-finite value at index " + index_string(m_dims, k));
        }
    }
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t a = 0; a < m_dims.size(); ++a) {
        os << (a ? ", " : "") << m_dims[a];
    }
    os << ']';
    return os.str();
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw ValidationError("softmax of an empty vector");
    }
    double max_logit = logits[0];
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!std::isfinite(logits[i])) {
            throw ValidationError("softmax: non-finite logit at index " + std::to_string(i));
        }
        max_logit = std::max(max_logit, logits[i]);
    }
    std::vector<double> out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        denom += out[i];
    }
    for (double& v : out) {
        v /= denom;
    }
    return out;
}

Tensor row_softmax(const Tensor& m) {
    if (m.rank() != 2) {
        throw ValidationError("row_softmax expects a rank-2 tensor, got " + m.shape_string());
    }
    m.require_finite("row_softmax input");
    Tensor out(m.dims());
    std::vector<double> logits(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto src = m.row(i);
        std::copy(src.begin(), src.end(), logits.begin());
        const auto probs = softmax(logits);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < probs.size(); ++j) {
            dst[j] = static_cast<float>(probs[j]);
        }
    }
    return out;
}

Moments mean_and_variance(std::span<const double> v) {
    if (v.empty()) {
        throw ValidationError("mean_and_variance of an empty vector");
    }
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    const double n = static_cast<double>(v.size());
    const double mean = sum / n;
    double sq = 0.0;
    for (double x : v) {
        const double dev = x - mean;
        sq += dev * dev;
    }
    return {mean, sq / n};
}

Moments mean_and_variance(const Tensor& v) {
    if (v.rank() != 1) {
        throw ValidationError("mean_and_variance expects a rank-1 tensor, got " + v.shape_string());
    }
    std::vector<double> wide(v.data().begin(), v.data().end());
    return mean_and_variance(wide);
}

// ---------------------------------------------------------------------------
// VTTF

namespace {

constexpr std::uint8_t kMagic[4] = {0x56, 0x54, 0x54, 0x46};
constexpr std::size_t kFixedHeader = 8;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
    if (t.empty()) {
        throw ValidationError("cannot encode an empty tensor");
    }
    t.require_finite("save_tensor");
    std::vector<std::uint8_t> out;
    out.reserve(kFixedHeader + 8 * t.rank() + 4 * t.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kVttfVersion);
    out.push_back(0);  // dtype f32
    out.push_back(static_cast<std::uint8_t>(t.rank()));
    out.push_back(0);
    for (std::size_t d : t.dims()) {
        put<std::uint64_t>(out, d);
    }
    const auto payload = t.data();
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(payload.data());
    out.insert(out.end(), bytes, bytes + payload.size_bytes());
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw TensorFormatError(FormatErrorCode::bad_magic, "bad magic");
    }
    if (bytes.size() < kFixedHeader) {
        throw TensorFormatError(FormatErrorCode::payload_length_mismatch, "payload length mismatch (truncated header)");
    }
    if (bytes[4] != kVttfVersion) {
        throw TensorFormatError(FormatErrorCode::unsupported_version,
                                "version mismatch: expected 1, got " + std::to_string(bytes[4]));
    }
    if (bytes[5] != 0) {
        throw TensorFormatError(FormatErrorCode::unsupported_dtype,
                                "unsupported dtype " + std::to_string(bytes[5]) + " (only f32 = 0)");
    }
    const std::size_t rank = bytes[6];
    if (rank < 1 || rank > 3 || bytes[7] != 0) {
        throw TensorFormatError(FormatErrorCode::bad_rank, "bad rank " + std::to_string(rank));
    }
    if (bytes.size() < kFixedHeader + 8 * rank) {
        throw TensorFormatError(FormatErrorCode::payload_length_mismatch, "payload length mismatch (truncated dims)");
    }
    std::vector<std::size_t> dims(rank);
    std::size_t count = 1;
    for (std::size_t a = 0; a < rank; ++a) {
        std::uint64_t d = 0;
        std::memcpy(&d, bytes.data() + kFixedHeader + 8 * a, 8);
        if (d == 0 || count > std::numeric_limits<std::size_t>::max() / 4 / d) {
            throw TensorFormatError(FormatErrorCode::payload_length_mismatch,
                                    "payload length mismatch (dim " + std::to_string(a) + " = " +
                                        std::to_string(d) + ")");
        }
        dims[a] = static_cast<std::size_t>(d);
        count *= dims[a];
    }
    const auto payload = bytes.subspan(kFixedHeader + 8 * rank);
    if (payload.size() != count * 4) {
        throw TensorFormatError(FormatErrorCode::payload_length_mismatch,
                                "payload length mismatch: expected " + std::to_string(count * 4) + " bytes, found " +
                                    std::to_string(payload.size()));
    }
    std::vector<float> data(count);
    std::memcpy(data.data(), payload.data(), payload.size());
    for (std::size_t k = 0; k < count; ++k) {
        if (!std::isfinite(data[k])) {
            throw TensorFormatError(FormatErrorCode::non_finite_payload,
                                    "non-finite payload at element " + std::to_string(k));
        }
    }
    return Tensor(std::move(dims), std::move(data));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("read failed for " + path.string());
    }
    try {
        return decode_tensor(bytes);
    } catch (const TensorFormatError& e) {
        throw TensorFormatError(e.code(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rng

std::uint64_t Rng::next_u64() {
    std::uint64_t z = (m_state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) {
        throw ValidationError("uniform_int: empty range");
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) {
        return static_cast<std::int64_t>(next_u64());
    }
    // Rejection sampling keeps the draw unbiased.
    constexpr std::uint64_t top = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = top - top % span;
    std::uint64_t x = next_u64();
    while (x >= limit) {
        x = next_u64();
    }
    return lo + static_cast<std::int64_t>(x % span);
}

Tensor Rng::uniform_tensor(std::vector<std::size_t> dims, double lo, double hi) {
    Tensor t(std::move(dims));
    for (float& v : t.data()) {
        v = static_cast<float>(uniform(lo, hi));
    }
    return t;
}

}  // namespace visiontrim
