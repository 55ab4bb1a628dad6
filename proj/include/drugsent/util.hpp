#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drugsent {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// FNV-1a over the raw bytes, rendered as 16 hex digits. Used for data
// fingerprints in manifests; not a cryptographic hash.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string file_fingerprint(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

// Parses an integer, also accepting integer-valued decimals such as "9.0".
std::optional<int> parse_integer_like(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace drugsent
