#pragma once

#include <cstdint>
#include <string_view>

namespace redmoment::hashing {

// FNV-1a, 64-bit: stable content digests for cache files and run manifests.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : data) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace redmoment::hashing
