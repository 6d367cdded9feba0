#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdgd/linalg.hpp"

namespace dcdgd {

/// Unbiased stochastic compressor family. The guaranteed signal-to-noise
/// floor eta is p/(1-p) for the sparsifier, the configured bound C for the
/// hybrid scheme, unbounded for identity, and absent for the ternary
/// operator (its noise power depends on the input).
struct CompressorSpec {
  enum class Variant { Identity, Sparsifier, Ternary, Hybrid };

  Variant variant = Variant::Identity;
  double p = 1.0;          // sparsifier keep probability (also hybrid residue probability)
  double snr_bound = 0.0;  // hybrid target C

  static CompressorSpec identity() { return {}; }

  static CompressorSpec sparsifier(double p) {
    if (!(p > 0.0 && p <= 1.0))
      throw std::invalid_argument("sparsifier: p must lie in (0, 1], got " + std::to_string(p));
    CompressorSpec s;
    s.variant = Variant::Sparsifier;
    s.p = p;
    return s;
  }

  static CompressorSpec ternary() {
    CompressorSpec s;
    s.variant = Variant::Ternary;
    return s;
  }

  /// margin is added to the default residue probability C/(C+1).
  static CompressorSpec hybrid(double c, std::optional<double> p = std::nullopt,
                               double margin = 0.0) {
    if (!(c > 0.0)) throw std::invalid_argument("hybrid: C must be positive");
    CompressorSpec s;
    s.variant = Variant::Hybrid;
    s.snr_bound = c;
    const double p_floor = c / (c + 1.0);
    s.p = p ? *p : std::min(1.0, p_floor + margin);
    if (s.p < p_floor || s.p > 1.0)
      throw std::invalid_argument("hybrid: p must lie in [C/(C+1), 1]");
    return s;
  }

  /// Guaranteed SNR floor, or nullopt when the operator offers none.
  std::optional<double> snr_floor() const {
    switch (variant) {
      case Variant::Identity:
        return std::numeric_limits<double>::infinity();
      case Variant::Sparsifier:
        return p >= 1.0 ? std::numeric_limits<double>::infinity() : p / (1.0 - p);
      case Variant::Hybrid:
        return snr_bound;
      case Variant::Ternary:
        return std::nullopt;
    }
    return std::nullopt;
  }

  std::string to_string() const {
    std::ostringstream os;
    switch (variant) {
      case Variant::Identity:
        return "identity";
      case Variant::Ternary:
        return "ternary";
      case Variant::Sparsifier:
        os << "sparsifier:p=" << p;
        return os.str();
      case Variant::Hybrid:
        os << "hybrid:C=" << snr_bound;
        if (p != snr_bound / (snr_bound + 1.0)) os << ",p=" << p;
        return os.str();
    }
    return "identity";
  }
};

/// Parses the textual forms `identity`, `dgd` (alias for identity),
/// `sparsifier:p=0.8`, `ternary`, `hybrid:C=2[,p=0.8]`.
inline CompressorSpec parse_compressor_spec(const std::string& text) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("bad compressor spec '" + text + "': " + why);
  };
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  if (head == "identity" || head == "dgd") {
    if (colon != std::string::npos) fail("takes no parameters");
    return CompressorSpec::identity();
  }
  if (head == "ternary") {
    if (colon != std::string::npos) fail("takes no parameters");
    return CompressorSpec::ternary();
  }
  std::optional<double> p, c;
  if (colon != std::string::npos) {
    std::string rest = text.substr(colon + 1);
    std::istringstream in(rest);
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) fail("expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      double value;
      try {
        value = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        fail("cannot parse number in '" + item + "'");
        return {};
      }
      if (key == "p")
        p = value;
      else if (key == "C" || key == "c")
        c = value;
      else
        fail("unknown parameter '" + key + "'");
    }
  }
  if (head == "sparsifier") {
    if (!p) fail("sparsifier requires p=...");
    return CompressorSpec::sparsifier(*p);
  }
  if (head == "hybrid") {
    if (!c) fail("hybrid requires C=...");
    return CompressorSpec::hybrid(*c, p);
  }
  fail("unknown variant '" + head + "'");
  return {};
}

/// Partition of a vector into ternary groups around anchor elements plus a
/// sparsified residue. Indices refer to positions in the magnitude-sorted
/// vector; sorted_to_original maps them back to input coordinates.
struct HybridPlan {
  int dim = 0;
  double snr_bound = 0.0;   // C
  double sparsifier_p = 0.0;
  std::vector<int> anchors;               // q_1..q_k, sorted positions
  std::vector<std::vector<int>> groups;   // group i contains its anchor
  std::vector<int> sparsified;            // residue, sorted positions
  std::vector<int> sorted_to_original;
  std::vector<double> anchor_magnitudes;  // |z_{q_i}|
  double objective_bits = 0.0;            // expected bit cost of this plan
  std::uint64_t magnitude_checksum = 0;

  int k() const { return static_cast<int>(anchors.size()); }

  int covered() const {
    int s = 0;
    for (const auto& g : groups) s += static_cast<int>(g.size());
    return s;
  }

  /// Group tag per sorted position: 0 = sparsified, g in [1, k] = group index.
  std::vector<int> tags() const {
    std::vector<int> t(dim, 0);
    for (int g = 0; g < k(); ++g)
      for (int idx : groups[g]) t[idx] = g + 1;
    return t;
  }
};

enum class Scheme : int { Raw = 0, Sparsifier = 1, Ternary = 2, Hybrid = 3 };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Raw:
      return "raw";
    case Scheme::Sparsifier:
      return "sparsifier";
    case Scheme::Ternary:
      return "ternary";
    case Scheme::Hybrid:
      return "hybrid";
  }
  return "?";
}

/// One realized compression of a vector: the decoded values a receiver will
/// reconstruct plus both cost figures (idealized model bits and actual wire
/// bits including headers and flags).
struct CompressedMessage {
  Scheme scheme = Scheme::Raw;
  int dim = 0;
  Vec decoded;
  double ternary_magnitude = 0.0;      // ternary scheme only
  std::optional<HybridPlan> plan;      // hybrid scheme only
  std::int64_t model_cost_bits = 0;
  std::int64_t wire_cost_bits = 0;
};

}  // namespace dcdgd
