#pragma once

// Little-endian byte writer/reader shared by every binary format.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dryrun/error.hpp"

namespace dryrun {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

class ByteWriter {
public:
    ByteWriter() = default;
    explicit ByteWriter(Bytes& out) : out_(&out) {}

    void u8(uint8_t v) { buf().push_back(v); }
    void u16(uint16_t v) { put(v, 2); }
    void u32(uint32_t v) { put(v, 4); }
    void u64(uint64_t v) { put(v, 8); }
    void raw(ByteSpan data) { buf().insert(buf().end(), data.begin(), data.end()); }
    void raw(std::string_view s) { buf().insert(buf().end(), s.begin(), s.end()); }
    void str(std::string_view s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s);
    }
    void blob(ByteSpan data) {
        u32(static_cast<uint32_t>(data.size()));
        raw(data);
    }
    /// Overwrite a previously written u32 at `pos`.
    void patch_u32(size_t pos, uint32_t v) {
        for (int i = 0; i < 4; ++i) buf()[pos + i] = static_cast<uint8_t>(v >> (8 * i));
    }

    [[nodiscard]] size_t size() const { return out_ ? out_->size() : own_.size(); }
    [[nodiscard]] Bytes take() { return out_ ? *out_ : std::move(own_); }
    [[nodiscard]] const Bytes& bytes() const { return out_ ? *out_ : own_; }

private:
    Bytes& buf() { return out_ ? *out_ : own_; }
    void put(uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf().push_back(static_cast<uint8_t>(v >> (8 * i)));
    }

    Bytes own_;
    Bytes* out_ = nullptr;
};

/// Bounds-checked reader; running past the end raises `code` (CorruptStream by default).
class ByteReader {
public:
    explicit ByteReader(ByteSpan data, ErrorCode code = ErrorCode::CorruptStream)
        : data_(data), code_(code) {}

    uint8_t u8() { return static_cast<uint8_t>(get(1)); }
    uint16_t u16() { return static_cast<uint16_t>(get(2)); }
    uint32_t u32() { return static_cast<uint32_t>(get(4)); }
    uint64_t u64() { return get(8); }
    ByteSpan raw(size_t n) {
        need(n);
        ByteSpan s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() {
        uint32_t n = u32();
        ByteSpan s = raw(n);
        return {s.begin(), s.end()};
    }
    Bytes blob() {
        uint32_t n = u32();
        ByteSpan s = raw(n);
        return {s.begin(), s.end()};
    }

    [[nodiscard]] size_t pos() const { return pos_; }
    [[nodiscard]] size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] bool done() const { return pos_ == data_.size(); }

private:
    void need(size_t n) const {
        if (data_.size() - pos_ < n) throw Error(code_, "truncated input");
    }
    uint64_t get(int n) {
        need(static_cast<size_t>(n));
        uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= uint64_t{data_[pos_ + i]} << (8 * i);
        pos_ += static_cast<size_t>(n);
        return v;
    }

    ByteSpan data_;
    size_t pos_ = 0;
    ErrorCode code_;
};

}  // namespace dryrun
