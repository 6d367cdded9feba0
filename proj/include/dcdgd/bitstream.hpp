#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcdgd {

/// Raised by the bit reader and the message decoder; carries the bit offset
/// at which the problem was detected.
struct DecodeError : std::runtime_error {
  std::size_t bit_offset;
  DecodeError(std::size_t offset, const std::string& reason)
      : std::runtime_error("decode error at bit " + std::to_string(offset) + ": " + reason),
        bit_offset(offset) {}
};

/// Self-delimiting bit sequence, most significant bit first.
class Bitstream {
 public:
  std::size_t size_bits() const { return nbits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  void append(std::uint64_t value, int width) {
    if (width < 0 || width > 64) throw std::invalid_argument("Bitstream: bad field width");
    for (int b = width - 1; b >= 0; --b) push_bit((value >> b) & 1u);
  }

  void append_float(float f) { append(std::bit_cast<std::uint32_t>(f), 32); }

  bool bit(std::size_t i) const { return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u; }

  void flip_bit(std::size_t i) { bytes_[i >> 3] ^= static_cast<std::uint8_t>(1u << (7 - (i & 7))); }

  bool operator==(const Bitstream& o) const = default;

  std::string hex_dump() const {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(bytes_.size() * 2 + 16);
    for (std::uint8_t b : bytes_) {
      s.push_back(digits[b >> 4]);
      s.push_back(digits[b & 0xf]);
    }
    s += " (" + std::to_string(nbits_) + " bits)";
    return s;
  }

 private:
  void push_bit(unsigned v) {
    if ((nbits_ & 7) == 0) bytes_.push_back(0);
    if (v) bytes_.back() |= static_cast<std::uint8_t>(1u << (7 - (nbits_ & 7)));
    ++nbits_;
  }

  std::vector<std::uint8_t> bytes_;
  std::size_t nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const Bitstream& s) : stream_(s) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return stream_.size_bits() - pos_; }

  std::uint64_t read(int width) {
    if (width < 0 || width > 64) throw std::invalid_argument("BitReader: bad field width");
    if (remaining() < static_cast<std::size_t>(width))
      throw DecodeError(pos_, "truncated stream, need " + std::to_string(width) + " bits, have " +
                                  std::to_string(remaining()));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v = (v << 1) | (stream_.bit(pos_++) ? 1u : 0u);
    return v;
  }

  float read_float() { return std::bit_cast<float>(static_cast<std::uint32_t>(read(32))); }

 private:
  const Bitstream& stream_;
  std::size_t pos_ = 0;
};

}  // namespace dcdgd
