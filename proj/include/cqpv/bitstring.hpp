#pragma once

// Fixed-capacity bit strings for the classical inputs x, y.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "cqpv/rng.hpp"

namespace cqpv {

class BitString {
 public:
  static constexpr int kMaxBits = 256;

  BitString() = default;
  explicit BitString(int n) : n_(n) {
    if (n < 1 || n > kMaxBits) throw std::invalid_argument("BitString: length must be in [1, 256]");
  }

  static BitString random(int n, Rng& rng) {
    BitString s(n);
    for (int w = 0; w < s.words(); ++w) s.w_[w] = rng.next_u64();
    s.mask_tail();
    return s;
  }

  static BitString from_u64(int n, std::uint64_t value) {
    BitString s(n);
    s.w_[0] = value;
    s.mask_tail();
    return s;
  }

  int size() const noexcept { return n_; }
  int words() const noexcept { return (n_ + 63) / 64; }
  int bytes() const noexcept { return (n_ + 7) / 8; }

  bool get(int i) const { return (w_.at(i / 64) >> (i % 64)) & 1U; }
  void set(int i, bool v) {
    check(i);
    const std::uint64_t bit = std::uint64_t{1} << (i % 64);
    if (v) w_[i / 64] |= bit;
    else w_[i / 64] &= ~bit;
  }
  void flip(int i) {
    check(i);
    w_[i / 64] ^= std::uint64_t{1} << (i % 64);
  }

  std::uint64_t word(int i) const { return w_.at(i); }

  /// Little-endian byte `i` (bit 0 of the string is bit 0 of byte 0).
  std::uint8_t byte(int i) const { return static_cast<std::uint8_t>(w_[i / 8] >> (8 * (i % 8))); }

  /// Hex digits, most significant first, ceil(n/4) characters.
  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const int nibbles = (n_ + 3) / 4;
    std::string out(static_cast<std::size_t>(nibbles), '0');
    for (int k = 0; k < nibbles; ++k) {
      const int shift = 4 * k;
      const unsigned v = (w_[shift / 64] >> (shift % 64)) & 0xFU;
      out[static_cast<std::size_t>(nibbles - 1 - k)] = kDigits[v];
    }
    return out;
  }

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  void check(int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("BitString: index out of range");
  }
  void mask_tail() {
    for (int w = words(); w < 4; ++w) w_[w] = 0;
    if (n_ % 64 != 0) w_[words() - 1] &= (std::uint64_t{1} << (n_ % 64)) - 1;
  }

  int n_ = 0;
  std::array<std::uint64_t, 4> w_{};
};

}  // namespace cqpv
