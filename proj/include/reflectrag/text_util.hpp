#pragma once

#include <string>
#include <string_view>

namespace reflectrag {

/// Lowercase hex SHA-256 of the bytes of `text`.
std::string sha256_hex(std::string_view text);

std::string_view trim(std::string_view text);

/// Locates the outermost JSON object embedded in free text (code fences and
/// surrounding prose allowed). Returns an empty view when none is found.
std::string_view find_json_object(std::string_view text);

} // namespace reflectrag
