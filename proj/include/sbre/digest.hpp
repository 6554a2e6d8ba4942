#pragma once

#include <string>
#include <string_view>

namespace sbre {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents; throws DataError if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace sbre
