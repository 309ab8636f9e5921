#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace edt {

// 64-bit FNV-1a. Used for image digests and config digests, where a stable,
// platform-independent value matters more than speed.
class Fnv1a {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  void update(std::span<const float> v) {
    for (float f : v) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      // Byte order fixed to little-endian regardless of host.
      unsigned char b[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                            static_cast<unsigned char>(bits >> 16),
                            static_cast<unsigned char>(bits >> 24)};
      update(b, 4);
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

inline std::uint64_t fnv1a(std::span<const float> v) {
  Fnv1a h;
  h.update(v);
  return h.digest();
}

}  // namespace edt
