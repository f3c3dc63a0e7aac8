#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scenesmith {

/// Lower-case hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// SHA-256 over every regular file below `dir` (relative path + contents, sorted by path).
std::string sha256_tree(const std::filesystem::path& dir);

/// First 8 bytes of the SHA-256 digest as an integer; used to seed stub generators.
std::uint64_t digest64(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace scenesmith
