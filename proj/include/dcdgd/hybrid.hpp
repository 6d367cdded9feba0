#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dcdgd/codec.hpp"
#include "dcdgd/cost_model.hpp"
#include "dcdgd/message.hpp"

namespace dcdgd {

namespace detail {

inline std::uint64_t fnv1a64(std::uint64_t h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (i * 8)) & 0xffu;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t magnitude_checksum(std::span<const double> sorted_magnitudes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double m : sorted_magnitudes) h = fnv1a64(h, std::bit_cast<std::uint64_t>(m));
  return h;
}

/// Membership test for joining a ternary group: the candidate magnitude m
/// must not exceed the anchor magnitude, and the induced noise m*(anchor-m)
/// must stay strictly below m^2/C. Evaluated literally so the realized plan
/// can be re-checked with the same arithmetic.
inline bool group_member_ok(double m, double anchor, double c) {
  return m <= anchor && m * (anchor - m) < m * m / c;
}

struct SortedView {
  std::vector<int> sorted_to_original;
  std::vector<double> magnitudes;  // descending
};

inline SortedView sort_by_magnitude(std::span<const double> z) {
  const int d = static_cast<int>(z.size());
  SortedView view;
  view.sorted_to_original.resize(d);
  std::iota(view.sorted_to_original.begin(), view.sorted_to_original.end(), 0);
  std::stable_sort(view.sorted_to_original.begin(), view.sorted_to_original.end(),
                   [&](int a, int b) { return std::abs(z[a]) > std::abs(z[b]); });
  view.magnitudes.resize(d);
  for (int i = 0; i < d; ++i) view.magnitudes[i] = std::abs(z[view.sorted_to_original[i]]);
  return view;
}

}  // namespace detail

struct PlannerStats {
  std::uint64_t operations = 0;
};

/// Greedy group selection: repeatedly find the element whose candidate
/// ternary set is largest, accept the group when its ternary cost beats
/// sparsifying the same elements, and stop at the first rejection. The
/// remaining elements are sparsified with keep probability p.
inline HybridPlan hybrid_plan(std::span<const double> z, double snr_bound,
                              const CostModel& model = {},
                              std::optional<double> p_override = std::nullopt,
                              PlannerStats* stats = nullptr) {
  if (!(snr_bound > 0.0)) throw std::invalid_argument("hybrid_plan: C must be positive");
  if (z.empty()) throw std::invalid_argument("hybrid_plan: empty vector");
  model.check();
  const int d = static_cast<int>(z.size());
  const double p = p_override ? *p_override : snr_bound / (snr_bound + 1.0);
  if (p < snr_bound / (snr_bound + 1.0) - 1e-15 || p > 1.0)
    throw std::invalid_argument("hybrid_plan: p must lie in [C/(C+1), 1]");

  detail::SortedView view = detail::sort_by_magnitude(z);
  std::uint64_t ops = 0;
  // Sorting work, counted analytically.
  ops += static_cast<std::uint64_t>(d) * (std::bit_width(static_cast<unsigned>(d)) + 1);

  HybridPlan plan;
  plan.dim = d;
  plan.snr_bound = snr_bound;
  plan.sparsifier_p = p;
  plan.sorted_to_original = view.sorted_to_original;
  plan.magnitude_checksum = detail::magnitude_checksum(view.magnitudes);

  // alive holds sorted positions of elements not yet placed in a group,
  // in descending magnitude order.
  std::vector<int> alive(d);
  std::iota(alive.begin(), alive.end(), 0);
  const double per_element_sparsifier_cost = model.c1 * p + model.c0t * (1.0 - p);

  while (!alive.empty()) {
    const int r = static_cast<int>(alive.size());
    int best_j = -1, best_lo = 0, best_hi = -1, best_size = 0;
    int lo = 0, hi = -1;
    for (int j = 0; j < r; ++j) {
      const double mj = view.magnitudes[alive[j]];
      ++ops;
      if (mj == 0.0) break;  // zero magnitudes never form groups and sort last
      while (view.magnitudes[alive[lo]] > mj) {
        ++lo;  // skip strictly larger magnitudes; ties stay in the window
        ++ops;
      }
      if (hi < j) hi = j;
      while (hi + 1 < r &&
             detail::group_member_ok(view.magnitudes[alive[hi + 1]], mj, snr_bound)) {
        ++hi;
        ++ops;
      }
      const int size = hi - lo + 1;
      if (size > best_size) {
        best_size = size;
        best_j = j;
        best_lo = lo;
        best_hi = hi;
      }
    }
    if (best_size == 0) break;

    const double ternary_cost = model.c1 + model.c0t * (best_size - 1);
    const double sparsifier_cost = per_element_sparsifier_cost * best_size;
    if (!(ternary_cost < sparsifier_cost)) break;

    std::vector<int> group(alive.begin() + best_lo, alive.begin() + best_hi + 1);
    plan.anchors.push_back(alive[best_j]);
    plan.anchor_magnitudes.push_back(view.magnitudes[alive[best_j]]);
    plan.groups.push_back(std::move(group));
    alive.erase(alive.begin() + best_lo, alive.begin() + best_hi + 1);
    ops += best_size;
  }

  plan.sparsified = alive;
  plan.objective_bits = hybrid_expected_cost(d, plan.k(), plan.covered(), p, model);
  if (stats) stats->operations = ops;
  return plan;
}

namespace detail {

struct BruteForceState {
  std::span<const double> magnitudes;  // descending
  double snr_bound = 0.0;
  double p = 0.0;
  const CostModel* model = nullptr;
  std::vector<double> group_anchor;   // anchor magnitude per open group
  std::vector<std::vector<int>> groups;
  std::vector<int> sparsified;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<int>> best_groups;
  std::vector<int> best_sparsified;

  void evaluate() {
    int covered = 0;
    for (const auto& g : groups) covered += static_cast<int>(g.size());
    const double cost = hybrid_expected_cost(static_cast<int>(magnitudes.size()),
                                             static_cast<int>(groups.size()), covered, p, *model);
    if (cost < best) {
      best = cost;
      best_groups = groups;
      best_sparsified = sparsified;
    }
  }

  void recurse(int pos) {
    const int d = static_cast<int>(magnitudes.size());
    if (pos == d) {
      evaluate();
      return;
    }
    const double m = magnitudes[pos];
    // sparsified
    sparsified.push_back(pos);
    recurse(pos + 1);
    sparsified.pop_back();
    // join an existing group; elements arrive in descending magnitude order,
    // so the group's first element is its anchor
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!group_member_ok(m, group_anchor[g], snr_bound)) continue;
      groups[g].push_back(pos);
      recurse(pos + 1);
      groups[g].pop_back();
    }
    // open a new group anchored here
    groups.push_back({pos});
    group_anchor.push_back(m);
    recurse(pos + 1);
    group_anchor.pop_back();
    groups.pop_back();
  }
};

}  // namespace detail

inline constexpr int kBruteForceMaxDim = 12;

/// Exhaustive minimizer over every valid anchor-group assignment. Shares the
/// membership predicate and the objective with hybrid_plan, so greedy plans
/// are always inside its search space.
inline HybridPlan brute_force_plan(std::span<const double> z, double snr_bound,
                                   const CostModel& model = {},
                                   std::optional<double> p_override = std::nullopt) {
  if (!(snr_bound > 0.0)) throw std::invalid_argument("brute_force_plan: C must be positive");
  if (z.empty()) throw std::invalid_argument("brute_force_plan: empty vector");
  if (static_cast<int>(z.size()) > kBruteForceMaxDim)
    throw std::invalid_argument("brute_force_plan: d > " + std::to_string(kBruteForceMaxDim) +
                                "; use hybrid_plan for larger vectors");
  model.check();
  const int d = static_cast<int>(z.size());
  const double p = p_override ? *p_override : snr_bound / (snr_bound + 1.0);

  detail::SortedView view = detail::sort_by_magnitude(z);
  detail::BruteForceState state;
  state.magnitudes = view.magnitudes;
  state.snr_bound = snr_bound;
  state.p = p;
  state.model = &model;
  state.recurse(0);

  HybridPlan plan;
  plan.dim = d;
  plan.snr_bound = snr_bound;
  plan.sparsifier_p = p;
  plan.sorted_to_original = view.sorted_to_original;
  plan.magnitude_checksum = detail::magnitude_checksum(view.magnitudes);
  plan.groups = state.best_groups;
  plan.sparsified = state.best_sparsified;
  for (const auto& g : plan.groups) {
    plan.anchors.push_back(g.front());
    plan.anchor_magnitudes.push_back(view.magnitudes[g.front()]);
  }
  plan.objective_bits = state.best;
  return plan;
}

}  // namespace dcdgd
