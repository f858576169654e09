#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace vtrig::aes {

using Block = std::array<std::uint8_t, 16>;

namespace detail {

constexpr std::uint8_t gf_mul(std::uint8_t a, std::uint8_t b) {
  std::uint16_t acc = 0;
  std::uint16_t aa = a;
  for (int i = 0; i < 8; ++i) {
    if (b & 1) acc ^= aa;
    b >>= 1;
    aa <<= 1;
    if (aa & 0x100) aa ^= 0x11b;
  }
  return static_cast<std::uint8_t>(acc);
}

constexpr std::uint8_t gf_inv(std::uint8_t a) {
  if (a == 0) return 0;
  for (int x = 1; x < 256; ++x) {
    if (gf_mul(a, static_cast<std::uint8_t>(x)) == 1)
      return static_cast<std::uint8_t>(x);
  }
  return 0;
}

constexpr std::uint8_t rotl8(std::uint8_t x, int k) {
  return static_cast<std::uint8_t>((x << k) | (x >> (8 - k)));
}

// S-box generated from the field inverse plus affine transform instead of a
// typed-in table.
constexpr std::array<std::uint8_t, 256> make_sbox() {
  std::array<std::uint8_t, 256> box{};
  for (int i = 0; i < 256; ++i) {
    const std::uint8_t inv = gf_inv(static_cast<std::uint8_t>(i));
    box[i] = static_cast<std::uint8_t>(inv ^ rotl8(inv, 1) ^ rotl8(inv, 2) ^
                                       rotl8(inv, 3) ^ rotl8(inv, 4) ^ 0x63);
  }
  return box;
}

}  // namespace detail

inline constexpr std::array<std::uint8_t, 256> kSbox = detail::make_sbox();

static_assert(kSbox[0x00] == 0x63);
static_assert(kSbox[0x53] == 0xed);
static_assert(kSbox[0xff] == 0x16);

inline constexpr std::uint8_t sbox(std::uint8_t x) { return kSbox[x]; }

inline constexpr int hamming_weight(std::uint8_t x) { return std::popcount(x); }

std::string to_hex(const Block& block);

// Parses exactly 32 hex characters; throws ConfigError otherwise.
Block parse_hex_block(std::string_view hex);

}  // namespace vtrig::aes
