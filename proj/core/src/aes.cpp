#include "vtrig/aes.hpp"

#include <cctype>

#include "vtrig/errors.hpp"

namespace vtrig::aes {

namespace {

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string to_hex(const Block& block) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(32);
  for (std::uint8_t b : block) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Block parse_hex_block(std::string_view hex) {
  if (hex.size() != 32)
    throw ConfigError("expected 32 hex characters for a 16-byte block, got " +
                      std::to_string(hex.size()));
  Block block{};
  for (int i = 0; i < 16; ++i) {
    const int hi = hex_digit(hex[2 * i]);
    const int lo = hex_digit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0)
      throw ConfigError("invalid hex character in block: " + std::string(hex));
    block[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return block;
}

}  // namespace vtrig::aes
