#pragma once

#include <string>
#include <string_view>

namespace certkit {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Shortest round-trip decimal form of a double ("%.17g"), with -0 folded to 0.
std::string canonical_number(double value);

}  // namespace certkit
