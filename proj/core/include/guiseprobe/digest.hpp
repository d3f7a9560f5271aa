#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gp {

// 64-bit FNV-1a. Used for provenance digests and cache keys, not security.
class Fnv1a64 {
 public:
  Fnv1a64& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a64& update(double v);
  Fnv1a64& update(std::uint64_t v);

  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string digest_bytes(std::string_view bytes);

// Digest of a file's raw content. Throws ValidationError if unreadable.
std::string digest_file(const std::string& path);

}  // namespace gp
