#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vas {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 64 bits of the SHA-256 of `data`, for seeding deterministic RNGs.
std::uint64_t digest_u64(std::string_view data);

std::string base64_encode(std::string_view data);

}  // namespace vas
