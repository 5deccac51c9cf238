#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ovtad::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

nlohmann::json read_json(const std::filesystem::path& path);

/// Canonical text form used for every JSON file the toolkit writes:
/// two-space indent plus a trailing newline.
std::string dump_json(const nlohmann::ordered_json& doc);

/// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t value);

}  // namespace ovtad::io
