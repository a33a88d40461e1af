#include "dryrun/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>

namespace dryrun {

Digest sha256(ByteSpan data) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
        throw Error(ErrorCode::Io, "sha256 failed");
    return out;
}

Digest sha256(std::string_view text) {
    return sha256(ByteSpan(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

Digest hmac_sha256(std::string_view key, ByteSpan data) {
    Digest out{};
    unsigned int len = 0;
    if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len) ==
            nullptr ||
        len != out.size())
        throw Error(ErrorCode::Io, "hmac-sha256 failed");
    return out;
}

uint32_t crc32(ByteSpan data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for large dumps.
    size_t off = 0;
    while (off < data.size()) {
        size_t n = std::min<size_t>(data.size() - off, 1u << 30);
        crc = ::crc32(crc, data.data() + off, static_cast<uInt>(n));
        off += n;
    }
    return static_cast<uint32_t>(crc);
}

std::string to_hex(const Digest& d) {
    std::string s;
    s.reserve(64);
    char buf[3];
    for (uint8_t b : d) {
        std::snprintf(buf, sizeof buf, "%02x", b);
        s += buf;
    }
    return s;
}

}  // namespace dryrun
