#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cordmorph {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over the destination, so
/// readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

bool is_gzip(std::span<const std::uint8_t> bytes);
Bytes gzip_decompress(std::span<const std::uint8_t> bytes);
/// Deterministic gzip member (zero mtime, no file name).
Bytes gzip_compress(std::span<const std::uint8_t> bytes);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

}  // namespace cordmorph
