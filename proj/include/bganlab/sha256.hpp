#pragma once

#include <string>
#include <string_view>

namespace bganlab {

/// Lowercase hex SHA-256 digest of the bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace bganlab
