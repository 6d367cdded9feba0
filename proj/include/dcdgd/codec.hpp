#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "dcdgd/bitstream.hpp"
#include "dcdgd/cost_model.hpp"
#include "dcdgd/message.hpp"

namespace dcdgd {

inline constexpr int kDimFieldBits = 16;
inline constexpr int kMaxDim = (1 << kDimFieldBits) - 1;

/// Expected bit cost of a hybrid plan with k groups covering `covered`
/// elements out of d, the residue sparsified with keep probability p.
/// Floats cost c1; ternary symbols and sparsified zeros cost c0t plus the
/// per-element group tag.
inline double hybrid_expected_cost(int d, int k, int covered, double p, const CostModel& model) {
  const double tag = CostModel::anchor_tag_bits(k);
  const double floats = k + (d - covered) * p;
  const double symbols = (covered - k) + (d - covered) * (1.0 - p);
  return model.c1 * floats + (model.c0t + tag) * symbols;
}

/// Expected sparsifier cost d*(c1*p + c0*(1-p)).
inline double sparsifier_expected_cost(int d, double p, const CostModel& model) {
  return d * (model.c1 * p + model.c0 * (1.0 - p));
}

inline double plan_model_cost(const HybridPlan& plan, const CostModel& model) {
  return hybrid_expected_cost(plan.dim, plan.k(), plan.covered(), plan.sparsifier_p, model);
}

/// Realized idealized-model cost of one message, in whole bits.
inline std::int64_t model_cost(const CompressedMessage& msg, const CostModel& model = {}) {
  model.check();
  const int d = msg.dim;
  switch (msg.scheme) {
    case Scheme::Raw:
      return static_cast<std::int64_t>(d) * model.c1;
    case Scheme::Sparsifier: {
      std::int64_t nonzero = 0;
      for (double v : msg.decoded) nonzero += (v != 0.0);
      return nonzero * model.c1 + (d - nonzero) * model.c0;
    }
    case Scheme::Ternary:
      return model.c1 + static_cast<std::int64_t>(d - 1) * model.c0t;
    case Scheme::Hybrid: {
      if (!msg.plan) throw std::invalid_argument("model_cost: hybrid message without plan");
      const HybridPlan& plan = *msg.plan;
      const int k = plan.k();
      const int covered = plan.covered();
      const int tag = CostModel::anchor_tag_bits(k);
      std::int64_t sparsified_nonzero = 0;
      for (int pos : plan.sparsified)
        sparsified_nonzero += (msg.decoded[plan.sorted_to_original[pos]] != 0.0);
      const std::int64_t sparsified_zero =
          static_cast<std::int64_t>(d - covered) - sparsified_nonzero;
      return (k + sparsified_nonzero) * model.c1 +
             ((covered - k) + sparsified_zero) * (model.c0t + tag);
    }
  }
  throw std::logic_error("model_cost: unknown scheme");
}

namespace detail {

inline void append_sparsified_element(Bitstream& out, double value) {
  if (value != 0.0) {
    out.append(1, 1);
    out.append_float(static_cast<float>(value));
  } else {
    out.append(0, 1);
  }
}

inline unsigned ternary_symbol(double value) {
  if (value == 0.0) return 0;
  return value > 0.0 ? 1 : 2;
}

}  // namespace detail

/// Serializes a message. Layout: 2-bit scheme tag, 16-bit dimension, then a
/// scheme-specific body; all values are 32-bit binary floating point, most
/// significant bit first.
inline Bitstream encode(const CompressedMessage& msg) {
  if (msg.dim < 1 || msg.dim > kMaxDim)
    throw std::invalid_argument("encode: dimension " + std::to_string(msg.dim) +
                                " outside [1, " + std::to_string(kMaxDim) + "]");
  if (static_cast<int>(msg.decoded.size()) != msg.dim)
    throw std::invalid_argument("encode: decoded size does not match dim");
  Bitstream out;
  out.append(static_cast<unsigned>(msg.scheme), 2);
  out.append(static_cast<unsigned>(msg.dim), kDimFieldBits);
  switch (msg.scheme) {
    case Scheme::Raw:
      for (double v : msg.decoded) out.append_float(static_cast<float>(v));
      break;
    case Scheme::Sparsifier:
      for (double v : msg.decoded) detail::append_sparsified_element(out, v);
      break;
    case Scheme::Ternary:
      out.append_float(static_cast<float>(msg.ternary_magnitude));
      for (double v : msg.decoded) out.append(detail::ternary_symbol(v), 2);
      break;
    case Scheme::Hybrid: {
      if (!msg.plan) throw std::invalid_argument("encode: hybrid message without plan");
      const HybridPlan& plan = *msg.plan;
      const int k = plan.k();
      if (k > kMaxDim) throw std::invalid_argument("encode: too many anchor groups");
      out.append(static_cast<unsigned>(k), kDimFieldBits);
      for (int g = 0; g < k; ++g) {
        out.append(static_cast<unsigned>(plan.sorted_to_original[plan.anchors[g]]),
                   kDimFieldBits);
        out.append_float(static_cast<float>(plan.anchor_magnitudes[g]));
      }
      const int tag_bits = CostModel::anchor_tag_bits(k);
      const std::vector<int> tags = plan.tags();
      std::vector<int> tag_of_original(msg.dim, 0);
      for (int pos = 0; pos < msg.dim; ++pos)
        tag_of_original[plan.sorted_to_original[pos]] = tags[pos];
      for (int i = 0; i < msg.dim; ++i) {
        out.append(static_cast<unsigned>(tag_of_original[i]), tag_bits);
        if (tag_of_original[i] > 0)
          out.append(detail::ternary_symbol(msg.decoded[i]), 2);
        else
          detail::append_sparsified_element(out, msg.decoded[i]);
      }
      break;
    }
  }
  return out;
}

namespace detail {

// Feasible total lengths per scheme, used so a corrupted scheme tag is
// reported against the header rather than as a late truncation.
inline void check_length_window(Scheme scheme, int d, std::size_t total) {
  const std::size_t header = 2 + kDimFieldBits;
  std::size_t lo = 0, hi = 0;
  switch (scheme) {
    case Scheme::Raw:
      lo = hi = header + 32u * d;
      break;
    case Scheme::Ternary:
      lo = hi = header + 32 + 2u * d;
      break;
    case Scheme::Sparsifier:
      lo = header + 1u * d;
      hi = header + 33u * d;
      break;
    case Scheme::Hybrid:
      lo = header + kDimFieldBits;  // k field; rest checked after k is read
      hi = header + kDimFieldBits + 48u * d + 33u * d + 16u * d;
      break;
  }
  if (total < lo || total > hi)
    throw DecodeError(0, std::string("stream length ") + std::to_string(total) +
                             " is inconsistent with scheme tag '" + scheme_name(scheme) +
                             "' and dimension " + std::to_string(d));
}

}  // namespace detail

/// Reverses encode(). Reports structured errors with the offending bit
/// offset for truncated streams, invalid symbols and out-of-range tags.
inline CompressedMessage decode(const Bitstream& stream, const CostModel& model = {}) {
  BitReader in(stream);
  CompressedMessage msg;
  msg.scheme = static_cast<Scheme>(in.read(2));
  const int d = static_cast<int>(in.read(kDimFieldBits));
  if (d < 1) throw DecodeError(2, "dimension field is zero");
  msg.dim = d;
  detail::check_length_window(msg.scheme, d, stream.size_bits());
  msg.decoded.assign(d, 0.0);

  auto read_symbol_value = [&](double magnitude) {
    const std::size_t at = in.offset();
    switch (in.read(2)) {
      case 0:
        return 0.0;
      case 1:
        return magnitude;
      case 2:
        return -magnitude;
      default:
        throw DecodeError(at, "invalid ternary symbol 11");
    }
  };

  switch (msg.scheme) {
    case Scheme::Raw:
      for (int i = 0; i < d; ++i) msg.decoded[i] = in.read_float();
      break;
    case Scheme::Sparsifier:
      for (int i = 0; i < d; ++i)
        if (in.read(1)) msg.decoded[i] = in.read_float();
      break;
    case Scheme::Ternary: {
      msg.ternary_magnitude = in.read_float();
      for (int i = 0; i < d; ++i) msg.decoded[i] = read_symbol_value(msg.ternary_magnitude);
      break;
    }
    case Scheme::Hybrid: {
      const std::size_t k_at = in.offset();
      const int k = static_cast<int>(in.read(kDimFieldBits));
      if (k > d) throw DecodeError(k_at, "group count exceeds dimension");
      HybridPlan plan;
      plan.dim = d;
      plan.groups.resize(k);
      plan.anchors.resize(k);
      plan.anchor_magnitudes.resize(k);
      plan.sorted_to_original.resize(d);
      for (int i = 0; i < d; ++i) plan.sorted_to_original[i] = i;
      for (int g = 0; g < k; ++g) {
        const std::size_t at = in.offset();
        const int anchor = static_cast<int>(in.read(kDimFieldBits));
        if (anchor >= d) throw DecodeError(at, "anchor index out of range");
        plan.anchors[g] = anchor;
        plan.anchor_magnitudes[g] = in.read_float();
      }
      const int tag_bits = CostModel::anchor_tag_bits(k);
      for (int i = 0; i < d; ++i) {
        const std::size_t at = in.offset();
        const int tag = tag_bits == 0 ? 0 : static_cast<int>(in.read(tag_bits));
        if (tag > k) throw DecodeError(at, "group tag out of range");
        if (tag > 0) {
          plan.groups[tag - 1].push_back(i);
          msg.decoded[i] = read_symbol_value(plan.anchor_magnitudes[tag - 1]);
        } else {
          plan.sparsified.push_back(i);
          if (in.read(1)) msg.decoded[i] = in.read_float();
        }
      }
      msg.plan = std::move(plan);
      break;
    }
  }
  if (in.remaining() > 0)
    throw DecodeError(in.offset(), std::to_string(in.remaining()) + " trailing bits");
  msg.wire_cost_bits = static_cast<std::int64_t>(stream.size_bits());
  msg.model_cost_bits = model_cost(msg, model);
  return msg;
}

}  // namespace dcdgd
