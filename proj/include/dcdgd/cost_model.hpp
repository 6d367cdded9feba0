#pragma once

#include <cstdint>
#include <stdexcept>

namespace dcdgd {

/// Idealized bit accounting: c1 bits per transmitted floating value, c0 bits
/// per sparsifier zero, c0t bits per ternary symbol. The anchor group tag
/// adds ceil(log2(k+1)) bits per tagged element.
struct CostModel {
  int c1 = 32;
  int c0 = 1;
  int c0t = 2;

  static int anchor_tag_bits(int k) {
    if (k < 0) throw std::invalid_argument("anchor_tag_bits: negative group count");
    int bits = 0;
    while ((1 << bits) < k + 1) ++bits;
    return bits;
  }

  void check() const {
    if (c1 <= 0 || c0 <= 0 || c0t <= 0)
      throw std::invalid_argument("CostModel: all per-symbol costs must be positive");
  }
};

}  // namespace dcdgd
