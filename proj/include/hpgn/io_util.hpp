#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hpgn {

/// Writes `bytes` to a sibling temporary file and renames it over `path`, so
/// readers never observe a truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace hpgn
