#include "dryrun/range_coder.hpp"

#include <array>

namespace dryrun::rc {
namespace {

constexpr uint32_t kTop = 1u << 24;
constexpr uint32_t kTotal = 1u << kTotalBits;

class ByteModel {
public:
    ByteModel() {
        freq_.fill(kTotal / 256);
        counts_.fill(0);
        rebuild_cumulative();
    }

    [[nodiscard]] uint32_t freq(unsigned sym) const { return freq_[sym]; }
    [[nodiscard]] uint32_t cum(unsigned sym) const { return cum_[sym]; }
    /// Largest symbol whose cumulative start is <= target.
    [[nodiscard]] unsigned symbol_at(uint32_t target) const {
        unsigned s = bucket_[target >> kBucketShift];
        while (cum_[s + 1] <= target) ++s;
        return s;
    }

    void update(unsigned sym) {
        ++counts_[sym];
        if (++seen_ < interval_) return;
        seen_ = 0;
        if (interval_ < kMaxInterval) interval_ *= 2;

        uint64_t sum = 0;
        for (uint32_t c : counts_) sum += c;
        uint32_t assigned = 0;
        unsigned best = 0;
        for (unsigned s = 0; s < 256; ++s) {
            freq_[s] = 1 + static_cast<uint32_t>(uint64_t{counts_[s]} * (kTotal - 256) / sum);
            assigned += freq_[s];
            if (counts_[s] > counts_[best]) best = s;
        }
        freq_[best] += kTotal - assigned;
        if (sum >= (1u << 16))
            for (auto& c : counts_) c = (c + 1) / 2;
        rebuild_cumulative();
    }

private:
    void rebuild_cumulative() {
        uint32_t acc = 0;
        for (unsigned s = 0; s < 256; ++s) {
            cum_[s] = acc;
            acc += freq_[s];
        }
        cum_[256] = acc;
        unsigned s = 0;
        for (uint32_t b = 0; b < 256; ++b) {
            while (cum_[s + 1] <= (b << kBucketShift)) ++s;
            bucket_[b] = static_cast<uint8_t>(s);
        }
    }

    static constexpr uint32_t kBucketShift = kTotalBits - 8;

    std::array<uint32_t, 256> freq_{};
    std::array<uint32_t, 257> cum_{};
    std::array<uint32_t, 256> counts_{};
    std::array<uint8_t, 256> bucket_{};
    uint32_t seen_ = 0;
    uint32_t interval_ = kFirstInterval;
};

class Encoder {
public:
    explicit Encoder(Bytes& out) : out_(out) {}

    void encode(uint32_t cum, uint32_t freq) {
        uint32_t r = range_ >> kTotalBits;
        low_ += uint64_t{r} * cum;
        range_ = r * freq;
        while (range_ < kTop) {
            range_ <<= 8;
            shift_low();
        }
    }

    void finish() {
        for (int i = 0; i < 5; ++i) shift_low();
    }

private:
    void shift_low() {
        if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
            auto carry = static_cast<uint8_t>(low_ >> 32);
            uint8_t pending = cache_;
            do {
                out_.push_back(static_cast<uint8_t>(pending + carry));
                pending = 0xFF;
            } while (--cache_size_ != 0);
            cache_ = static_cast<uint8_t>(low_ >> 24);
        }
        ++cache_size_;
        low_ = (low_ & 0x00FFFFFFu) << 8;
    }

    Bytes& out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t cache_size_ = 1;
};

class Decoder {
public:
    explicit Decoder(ByteSpan in) : in_(in) {
        if (next() != 0) throw Error(ErrorCode::CorruptStream, "range stream must start with 0x00");
        for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next();
    }

    unsigned decode(const ByteModel& model) {
        uint32_t r = range_ >> kTotalBits;
        uint32_t target = code_ / r;
        if (target >= kTotal) throw Error(ErrorCode::CorruptStream, "code outside model range");
        unsigned sym = model.symbol_at(target);
        code_ -= r * model.cum(sym);
        range_ = r * model.freq(sym);
        while (range_ < kTop) {
            code_ = (code_ << 8) | next();
            range_ <<= 8;
        }
        return sym;
    }

    [[nodiscard]] bool exhausted() const { return pos_ == in_.size(); }

private:
    uint32_t next() {
        if (pos_ >= in_.size()) throw Error(ErrorCode::CorruptStream, "range stream truncated");
        return in_[pos_++];
    }

    ByteSpan in_;
    size_t pos_ = 0;
    uint32_t code_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace

Bytes encode(ByteSpan input) {
    Bytes out;
    out.reserve(input.size() + input.size() / 64 + 16);
    ByteWriter(out).u32(static_cast<uint32_t>(input.size()));
    if (input.empty()) return out;
    ByteModel model;
    Encoder enc(out);
    for (uint8_t b : input) {
        enc.encode(model.cum(b), model.freq(b));
        model.update(b);
    }
    enc.finish();
    return out;
}

Bytes decode(ByteSpan coded) {
    ByteReader header(coded);
    uint32_t n = header.u32();
    ByteSpan body = coded.subspan(4);
    Bytes out;
    if (n == 0) {
        if (!body.empty()) throw Error(ErrorCode::CorruptStream, "trailing bytes after empty stream");
        return out;
    }
    // A valid stream never shrinks below 1/2^15 bits per byte; reject absurd lengths before allocating.
    if (body.size() < 5 || n / 4096 > body.size() * 8) throw Error(ErrorCode::CorruptStream, "declared length too large");
    out.reserve(n);
    ByteModel model;
    Decoder dec(body);
    for (uint32_t i = 0; i < n; ++i) {
        unsigned sym = dec.decode(model);
        out.push_back(static_cast<uint8_t>(sym));
        model.update(sym);
    }
    if (!dec.exhausted()) throw Error(ErrorCode::CorruptStream, "trailing bytes after range stream");
    return out;
}

}  // namespace dryrun::rc
