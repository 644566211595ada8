#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cvrlab {

inline uint64_t fnv1a64(const void* data, size_t n,
                        uint64_t h = 0xCBF29CE484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

}  // namespace cvrlab
