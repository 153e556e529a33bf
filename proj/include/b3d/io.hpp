#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace b3d {

using Bytes = std::vector<std::uint8_t>;

// kMissingFile when absent, kIo on read failure.
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over `path`, so a failure never
// leaves a truncated file behind.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
Bytes base64_decode(std::string_view text);

}  // namespace b3d
