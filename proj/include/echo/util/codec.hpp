#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace echo::util {

// CRC-32 (IEEE 802.3 polynomial, as in zlib/PNG).
std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed = 0);

std::string base64_encode(std::string_view bytes);

// 64-bit FNV-1a, used to derive per-item seeds that do not depend on scheduling.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace echo::util
