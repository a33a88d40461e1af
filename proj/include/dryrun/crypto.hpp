#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "dryrun/bytes.hpp"

namespace dryrun {

using Digest = std::array<uint8_t, 32>;

Digest sha256(ByteSpan data);
Digest sha256(std::string_view text);

/// Keyed digest used to "sign" recordings.
Digest hmac_sha256(std::string_view key, ByteSpan data);

uint32_t crc32(ByteSpan data);

std::string to_hex(const Digest& d);

}  // namespace dryrun
