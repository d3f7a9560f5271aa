#include "guiseprobe/digest.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "guiseprobe/errors.hpp"

namespace gp {

Fnv1a64& Fnv1a64::update(double v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  return update(bits);
}

Fnv1a64& Fnv1a64::update(std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return update(std::string_view(buf, 8));
}

std::string Fnv1a64::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  std::uint64_t v = state_;
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string digest_bytes(std::string_view bytes) {
  return Fnv1a64().update(bytes).hex();
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return digest_bytes(buf.str());
}

}  // namespace gp
