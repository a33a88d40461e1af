#pragma once

// Small helpers for the line-oriented text formats.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dryrun::text {

std::string_view trim(std::string_view s);
/// Drops everything from the first `#`.
std::string_view strip_comment(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::vector<std::string_view> split_lines(std::string_view s);

/// Accepts `0x`-prefixed hex or plain decimal.
std::optional<uint64_t> parse_u64(std::string_view s);
/// Accepts hex digits with or without `0x`.
std::optional<uint64_t> parse_hex(std::string_view s);

std::string hex(uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

}  // namespace dryrun::text
