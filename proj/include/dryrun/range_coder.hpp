#pragma once

// Adaptive order-0 range coder used for memory dumps.
//
// Stream layout: u32 LE original length, then (if length > 0) the coder
// output. The coder is the carry-propagating variant: 64-bit `low`, 32-bit
// `range`, one cached byte plus a run of pending 0xFF bytes, renormalizing by
// one byte whenever range < 2^24. The first coder byte is always 0x00.
//
// Model: coding frequencies always sum to 2^15. They start uniform (128 per
// symbol). Every coded symbol bumps its occurrence count; after `interval`
// symbols the table is rebuilt as
//     f[s] = 1 + floor(count[s] * (2^15 - 256) / sum(count))
// with the rounding remainder added to the most frequent symbol (lowest
// index on ties). `interval` starts at 16 and doubles per rebuild up to 1024.
// When sum(count) reaches 2^16 at a rebuild, all counts are halved (rounding
// up) afterwards. Encoder and decoder run the identical model, so output is
// bit-stable.

#include "dryrun/bytes.hpp"

namespace dryrun::rc {

inline constexpr uint32_t kTotalBits = 15;
inline constexpr uint32_t kFirstInterval = 16;
inline constexpr uint32_t kMaxInterval = 1024;

Bytes encode(ByteSpan input);

/// Throws Error(CorruptStream) on truncated, trailing, or out-of-model input.
Bytes decode(ByteSpan coded);

}  // namespace dryrun::rc
