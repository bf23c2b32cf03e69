#pragma once

#include <filesystem>
#include <string>

namespace traitscale {

/// Hex SHA-256 of a file's contents (OpenSSL EVP).
std::string sha256_file(const std::filesystem::path& path);

std::string sha256_string(const std::string& data);

}  // namespace traitscale
