#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

#include "dcdgd/codec.hpp"
#include "dcdgd/hybrid.hpp"
#include "dcdgd/message.hpp"
#include "dcdgd/random.hpp"

namespace dcdgd {

/// Analytic noise power of the ternary operator on a given input:
/// sum_i |z_i| (||z||_inf - |z_i|).
inline double ternary_noise_power(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("ternary_noise_power: empty vector");
  const double m = norm_inf(z);
  double s = 0.0;
  for (double v : z) s += std::abs(v) * (m - std::abs(v));
  return s;
}

/// One realized compression with the plan precomputed for this input. The
/// plan's checksum of sorted magnitudes must match z.
inline CompressedMessage hybrid_compress(const HybridPlan& plan, std::span<const double> z,
                                         RandomStream& rng, const CostModel& model = {}) {
  if (static_cast<int>(z.size()) != plan.dim)
    throw std::invalid_argument("hybrid_compress: plan dimension mismatch");
  {
    detail::SortedView view = detail::sort_by_magnitude(z);
    if (detail::magnitude_checksum(view.magnitudes) != plan.magnitude_checksum)
      throw std::invalid_argument("hybrid_compress: plan was computed for a different vector");
  }
  const int d = plan.dim;
  std::vector<double> group_magnitude(d, 0.0);
  std::vector<char> grouped(d, 0);
  for (int g = 0; g < plan.k(); ++g)
    for (int pos : plan.groups[g]) {
      const int orig = plan.sorted_to_original[pos];
      grouped[orig] = 1;
      group_magnitude[orig] = plan.anchor_magnitudes[g];
    }

  CompressedMessage msg;
  msg.scheme = Scheme::Hybrid;
  msg.dim = d;
  msg.decoded.assign(d, 0.0);
  msg.plan = plan;
  for (int i = 0; i < d; ++i) {
    if (grouped[i]) {
      const double mag = group_magnitude[i];
      const double prob = mag > 0.0 ? std::abs(z[i]) / mag : 0.0;
      if (rng.bernoulli(prob)) msg.decoded[i] = (z[i] < 0.0 ? -mag : mag);
    } else {
      if (rng.bernoulli(plan.sparsifier_p)) msg.decoded[i] = z[i] / plan.sparsifier_p;
    }
  }
  msg.model_cost_bits = model_cost(msg, model);
  msg.wire_cost_bits = static_cast<std::int64_t>(encode(msg).size_bits());
  return msg;
}

/// Draws one compressed message. The rng stream is consumed coordinate by
/// coordinate in a fixed order, so a (seed, trial, node, iteration) keyed
/// stream reproduces the draw exactly.
inline CompressedMessage compress(const CompressorSpec& spec, std::span<const double> z,
                                  RandomStream& rng, const CostModel& model = {}) {
  if (z.empty()) throw std::invalid_argument("compress: empty vector");
  if (!all_finite(z)) throw std::invalid_argument("compress: input has non-finite entries");
  const int d = static_cast<int>(z.size());

  CompressedMessage msg;
  msg.dim = d;
  switch (spec.variant) {
    case CompressorSpec::Variant::Identity: {
      msg.scheme = Scheme::Raw;
      msg.decoded.assign(z.begin(), z.end());
      break;
    }
    case CompressorSpec::Variant::Sparsifier: {
      msg.scheme = Scheme::Sparsifier;
      msg.decoded.assign(d, 0.0);
      for (int i = 0; i < d; ++i)
        if (rng.bernoulli(spec.p)) msg.decoded[i] = z[i] / spec.p;
      break;
    }
    case CompressorSpec::Variant::Ternary: {
      msg.scheme = Scheme::Ternary;
      msg.decoded.assign(d, 0.0);
      const double m = norm_inf(z);
      msg.ternary_magnitude = m;
      for (int i = 0; i < d; ++i) {
        const double prob = m > 0.0 ? std::abs(z[i]) / m : 0.0;
        if (rng.bernoulli(prob)) msg.decoded[i] = (z[i] < 0.0 ? -m : m);
      }
      break;
    }
    case CompressorSpec::Variant::Hybrid: {
      HybridPlan plan = hybrid_plan(z, spec.snr_bound, model, spec.p);
      return hybrid_compress(plan, z, rng, model);
    }
  }
  msg.model_cost_bits = model_cost(msg, model);
  msg.wire_cost_bits = static_cast<std::int64_t>(encode(msg).size_bits());
  return msg;
}

struct CompressorStats {
  double bias_norm = 0.0;
  double empirical_snr = 0.0;       // ||z||^2 / mean ||eps||^2
  double mean_noise_power = 0.0;    // mean ||eps||^2
  double noise_power_std = 0.0;     // sample std of ||eps||^2 across trials
  double mean_model_cost_bits = 0.0;
  int trials = 0;
};

/// Monte-Carlo bias, SNR and cost over independent draws of compress().
inline CompressorStats estimate_stats(const CompressorSpec& spec, std::span<const double> z,
                                      int trials, RandomStream& rng,
                                      const CostModel& model = {}) {
  if (trials < 2) throw std::invalid_argument("estimate_stats: need at least 2 trials");
  const int d = static_cast<int>(z.size());
  Vec mean(d, 0.0);
  double noise_sum = 0.0, noise_sq_sum = 0.0, cost_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    const CompressedMessage msg = compress(spec, z, rng, model);
    double eps_sq = 0.0;
    for (int i = 0; i < d; ++i) {
      mean[i] += msg.decoded[i];
      const double e = msg.decoded[i] - z[i];
      eps_sq += e * e;
    }
    noise_sum += eps_sq;
    noise_sq_sum += eps_sq * eps_sq;
    cost_sum += static_cast<double>(msg.model_cost_bits);
  }
  CompressorStats stats;
  stats.trials = trials;
  double bias_sq = 0.0;
  for (int i = 0; i < d; ++i) {
    mean[i] /= trials;
    bias_sq += (mean[i] - z[i]) * (mean[i] - z[i]);
  }
  stats.bias_norm = std::sqrt(bias_sq);
  stats.mean_noise_power = noise_sum / trials;
  const double var =
      std::max(0.0, (noise_sq_sum - noise_sum * noise_sum / trials) / (trials - 1));
  stats.noise_power_std = std::sqrt(var);
  stats.mean_model_cost_bits = cost_sum / trials;
  stats.empirical_snr = stats.mean_noise_power > 0.0
                            ? norm2_sq(z) / stats.mean_noise_power
                            : std::numeric_limits<double>::infinity();
  return stats;
}

}  // namespace dcdgd
