#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace xmeat {

/// Lower-case hex SHA-256 of a byte range.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);

/// SHA-256 of a file's contents. Throws xmeat::ValidationError if it cannot be opened.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace xmeat
