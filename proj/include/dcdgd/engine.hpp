#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdgd/compressor.hpp"
#include "dcdgd/consensus.hpp"
#include "dcdgd/objective.hpp"
#include "dcdgd/spectral.hpp"

namespace dcdgd {

/// Per-node quadruple: local copy x, aggregation accumulator y,
/// pre-differential iterate z, and the current differential d.
struct NodeState {
  Vec x, y, z, d;
};

struct StepSchedule {
  enum class Kind { Constant, Sublinear };
  Kind kind = Kind::Constant;
  double alpha = 0.1;  // Constant
  double c2 = 1.0;     // Sublinear: alpha_t = (c2 / t)^(1/3)
  double cap = std::numeric_limits<double>::infinity();

  static StepSchedule constant(double alpha) {
    StepSchedule s;
    s.alpha = alpha;
    return s;
  }

  static StepSchedule sublinear(double c2, double cap = std::numeric_limits<double>::infinity()) {
    StepSchedule s;
    s.kind = Kind::Sublinear;
    s.c2 = c2;
    s.cap = cap;
    return s;
  }

  double at(int t) const {
    if (t < 1) throw std::invalid_argument("StepSchedule: t starts at 1");
    const double a = kind == Kind::Constant ? alpha : std::cbrt(c2 / t);
    return std::min(a, cap);
  }
};

enum class CostAccounting {
  BroadcastOnce,  // each node's message counted once per iteration
  PerLink,        // counted once per incident link
};

struct RunConfig {
  ConsensusMatrix matrix;
  std::shared_ptr<const GlobalObjective> objective;
  CompressorSpec compressor;
  StepSchedule schedule;
  int iterations = 300;
  std::uint64_t master_seed = 1;
  int trial_count = 1;
  CostModel cost_model;
  CostAccounting cost_accounting = CostAccounting::BroadcastOnce;
  bool allow_snr_violation = false;
  double f_ref = 0.0;
  double divergence_factor = 1e6;
};

struct IterationMetrics {
  int t = 0;
  Vec mean_iterate;
  double grad_norm_sq = 0.0;   // ||grad f(mean iterate)||^2
  double gap = 0.0;            // f(mean iterate) - f_ref
  double consensus_dev = 0.0;  // sum_i ||x_i - mean||^2
  double lyapunov = 0.0;
  std::int64_t cum_bits = 0;   // model-accounted bits sent through t
};

/// 0.5 x'(I - W (x) I)x + alpha * sum_i f_i(x_i) for a stacked iterate.
inline double lyapunov(const std::vector<Vec>& x, double alpha, const ConsensusMatrix& w,
                       const GlobalObjective& objective) {
  const int n = w.n;
  if (static_cast<int>(x.size()) != n || n != objective.node_count())
    throw std::invalid_argument("lyapunov: dimension mismatch");
  double quad = 0.0;
  double fsum = 0.0;
  for (int i = 0; i < n; ++i) {
    quad += norm2_sq(x[i]);
    for (int j = 0; j < n; ++j)
      if (w.weights(i, j) != 0.0) quad -= w.weights(i, j) * dot(x[i], x[j]);
    fsum += objective.locals[i].value(x[i]);
  }
  return 0.5 * quad + alpha * fsum;
}

/// One trial of the differential-coded compressed consensus descent loop.
/// Every iteration draws a single compressed message per node; that exact
/// realization updates the sender's own copy and every neighbor's aggregate.
class Engine {
 public:
  Engine(const RunConfig& config, int trial_index)
      : cfg_(config), trial_(trial_index), n_(config.matrix.n) {
    if (!cfg_.objective) throw std::invalid_argument("Engine: missing objective");
    dim_ = cfg_.objective->dim;
    if (cfg_.objective->node_count() != n_)
      throw std::invalid_argument("Engine: consensus matrix has " + std::to_string(n_) +
                                  " nodes but objective has " +
                                  std::to_string(cfg_.objective->node_count()) + " locals");
    if (cfg_.iterations < 1) throw std::invalid_argument("Engine: iterations must be >= 1");

    if (!cfg_.allow_snr_violation) {
      const SpectralReport rep = spectral(cfg_.matrix);
      const double eta_min = (1.0 - rep.lambda_n) / (1.0 + rep.lambda_n);
      const std::optional<double> floor = cfg_.compressor.snr_floor();
      const bool ok = floor.has_value() && *floor > eta_min;
      if (!ok) {
        const std::string floor_text =
            floor ? detail::fmt_double(*floor) : std::string("none (input-dependent noise)");
        throw std::invalid_argument(
            "compressor SNR floor eta = " + floor_text +
            " does not satisfy eta > (1 - lambda_N)/(1 + lambda_N) = " +
            detail::fmt_double(eta_min) + " (lambda_N = " + detail::fmt_double(rep.lambda_n) +
            "); convergence is not guaranteed. Set allow_snr_violation to run anyway.");
      }
    }

    degrees_ = cfg_.matrix.topology.degrees();
    nodes_.assign(n_, NodeState{Vec(dim_, 0.0), Vec(dim_, 0.0), Vec(dim_, 0.0), Vec(dim_, 0.0)});
    const double alpha1 = cfg_.schedule.at(1);
    for (int i = 0; i < n_; ++i) {
      Vec g = cfg_.objective->locals[i].gradient(nodes_[i].x);
      for (int j = 0; j < dim_; ++j) {
        nodes_[i].z[j] = -alpha1 * g[j];
        nodes_[i].d[j] = nodes_[i].z[j] - nodes_[i].x[j];
      }
    }
    last_alpha_ = alpha1;
    f_zero_ = cfg_.objective->value(Vec(dim_, 0.0));
    initial_gap_ = f_zero_ - cfg_.f_ref;
  }

  int iteration() const { return t_done_; }
  bool diverged() const { return diverged_; }
  int diverged_at() const { return diverged_at_; }
  double initial_gap() const { return initial_gap_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  double last_alpha() const { return last_alpha_; }

  /// ||d||^2 of the differential that the *next* iteration will transmit;
  /// equals ||grad L_alpha(x_t)||^2 for the step size used last.
  double pending_diff_norm_sq() const {
    double s = 0.0;
    for (const auto& node : nodes_) s += norm2_sq(node.d);
    return s;
  }

  IterationMetrics step() {
    if (diverged_) throw std::logic_error("Engine::step called after divergence");
    const int t = t_done_ + 1;
    const double alpha_t = cfg_.schedule.at(t);

    std::vector<Vec> payload(n_);
    for (int i = 0; i < n_; ++i) {
      RandomStream rng = RandomStream::derive(cfg_.master_seed, static_cast<std::uint64_t>(trial_),
                                              static_cast<std::uint64_t>(i),
                                              static_cast<std::uint64_t>(t));
      CompressedMessage msg = compress(cfg_.compressor, nodes_[i].d, rng, cfg_.cost_model);
      const std::int64_t copies =
          cfg_.cost_accounting == CostAccounting::PerLink ? degrees_[i] : 1;
      cum_bits_ += msg.model_cost_bits * copies;
      payload[i] = std::move(msg.decoded);
    }

    // 3-a: inexact local update with the node's own realized draw
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < dim_; ++j) nodes_[i].x[j] += payload[i][j];
    // 3-b: weighted aggregation of the identical realizations, self included
    for (int i = 0; i < n_; ++i)
      for (int k = 0; k < n_; ++k) {
        const double w = cfg_.matrix.weights(i, k);
        if (w != 0.0) axpy(w, payload[k], nodes_[i].y);
      }
    // 3-c and 3-d: local gradient step and next differential
    for (int i = 0; i < n_; ++i) {
      Vec g = cfg_.objective->locals[i].gradient(nodes_[i].x);
      for (int j = 0; j < dim_; ++j) {
        nodes_[i].z[j] = nodes_[i].y[j] - alpha_t * g[j];
        nodes_[i].d[j] = nodes_[i].z[j] - nodes_[i].x[j];
      }
    }
    last_alpha_ = alpha_t;
    t_done_ = t;

    IterationMetrics m = measure(t, alpha_t);
    const double clip = divergence_clip();
    bool finite = std::isfinite(m.gap) && std::isfinite(m.grad_norm_sq) &&
                  std::isfinite(m.consensus_dev) && std::isfinite(m.lyapunov);
    for (const auto& node : nodes_)
      finite = finite && all_finite(node.x) && all_finite(node.d);
    if (!finite || m.gap > clip) {
      diverged_ = true;
      diverged_at_ = t;
      auto sanitize = [&](double v) { return std::isfinite(v) ? std::min(v, clip) : clip; };
      m.gap = sanitize(m.gap);
      m.grad_norm_sq = sanitize(m.grad_norm_sq);
      m.consensus_dev = sanitize(m.consensus_dev);
      m.lyapunov = std::isfinite(m.lyapunov) ? m.lyapunov : clip;
    }
    return m;
  }

  /// || y_t - (W (x) I) x_t ||, which stays at rounding level because the
  /// aggregate accumulates the same realizations the copies do.
  double y_consistency_probe() const {
    double s = 0.0;
    Vec wx(dim_);
    for (int i = 0; i < n_; ++i) {
      std::fill(wx.begin(), wx.end(), 0.0);
      for (int k = 0; k < n_; ++k) {
        const double w = cfg_.matrix.weights(i, k);
        if (w != 0.0) axpy(w, nodes_[k].x, wx);
      }
      for (int j = 0; j < dim_; ++j) {
        const double r = nodes_[i].y[j] - wx[j];
        s += r * r;
      }
    }
    return std::sqrt(s);
  }

  /// || d_{t+1} + grad L_{alpha_t}(x_t) ||, evaluated with a fresh analytic
  /// gradient of the Lyapunov function.
  double lyapunov_grad_probe() const {
    double s = 0.0;
    Vec grad_l(dim_);
    for (int i = 0; i < n_; ++i) {
      Vec g = cfg_.objective->locals[i].gradient(nodes_[i].x);
      for (int j = 0; j < dim_; ++j) grad_l[j] = nodes_[i].x[j] + last_alpha_ * g[j];
      for (int k = 0; k < n_; ++k) {
        const double w = cfg_.matrix.weights(i, k);
        if (w != 0.0) axpy(-w, nodes_[k].x, grad_l);
      }
      for (int j = 0; j < dim_; ++j) {
        const double r = nodes_[i].d[j] + grad_l[j];
        s += r * r;
      }
    }
    return std::sqrt(s);
  }

  double grad_l_norm() const {
    double s = 0.0;
    Vec grad_l(dim_);
    for (int i = 0; i < n_; ++i) {
      Vec g = cfg_.objective->locals[i].gradient(nodes_[i].x);
      for (int j = 0; j < dim_; ++j) grad_l[j] = nodes_[i].x[j] + last_alpha_ * g[j];
      for (int k = 0; k < n_; ++k) {
        const double w = cfg_.matrix.weights(i, k);
        if (w != 0.0) axpy(-w, nodes_[k].x, grad_l);
      }
      s += norm2_sq(grad_l);
    }
    return std::sqrt(s);
  }

 private:
  double divergence_clip() const {
    return initial_gap_ > 0.0 ? cfg_.divergence_factor * initial_gap_
                              : std::numeric_limits<double>::infinity();
  }

  IterationMetrics measure(int t, double alpha_t) const {
    IterationMetrics m;
    m.t = t;
    m.cum_bits = cum_bits_;
    m.mean_iterate.assign(dim_, 0.0);
    for (const auto& node : nodes_) axpy(1.0 / n_, node.x, m.mean_iterate);
    Vec grad = cfg_.objective->gradient(m.mean_iterate);
    m.grad_norm_sq = norm2_sq(grad);
    m.gap = cfg_.objective->value(m.mean_iterate) - cfg_.f_ref;
    double dev = 0.0;
    for (const auto& node : nodes_)
      for (int j = 0; j < dim_; ++j) {
        const double r = node.x[j] - m.mean_iterate[j];
        dev += r * r;
      }
    m.consensus_dev = dev;
    std::vector<Vec> stacked;
    stacked.reserve(n_);
    for (const auto& node : nodes_) stacked.push_back(node.x);
    m.lyapunov = lyapunov(stacked, alpha_t, cfg_.matrix, *cfg_.objective);
    return m;
  }

  RunConfig cfg_;
  int trial_ = 0;
  int n_ = 0;
  int dim_ = 0;
  std::vector<int> degrees_;
  std::vector<NodeState> nodes_;
  std::int64_t cum_bits_ = 0;
  int t_done_ = 0;
  double last_alpha_ = 0.0;
  double f_zero_ = 0.0;
  double initial_gap_ = 0.0;
  bool diverged_ = false;
  int diverged_at_ = -1;
};

struct TrialSeries {
  std::vector<IterationMetrics> metrics;
  std::vector<double> lyap_grad_sq;  // ||grad L(x_tau)||^2; index tau, tau=0 is the init state
  bool diverged = false;
  int diverged_at = -1;
};

struct RunResult {
  std::vector<TrialSeries> trials;
  bool theory_feasible = true;
  std::string feasibility_note;
  double initial_gap = 0.0;
  double f_zero = 0.0;
  SpectralReport spectral_report;

  int diverged_trials() const {
    int c = 0;
    for (const auto& t : trials) c += t.diverged;
    return c;
  }
};

/// Runs trial_count independent trials; trial k derives all of its random
/// streams from (master_seed, k, node, iteration), so results are
/// reproducible and independent of execution order.
inline RunResult run(const RunConfig& config) {
  if (config.trial_count < 1) throw std::invalid_argument("run: trial_count must be >= 1");
  RunResult result;
  result.spectral_report = spectral(config.matrix);
  const double eta_min =
      (1.0 - result.spectral_report.lambda_n) / (1.0 + result.spectral_report.lambda_n);
  const std::optional<double> floor = config.compressor.snr_floor();
  result.theory_feasible = floor.has_value() && *floor > eta_min;
  if (!result.theory_feasible)
    result.feasibility_note =
        "SNR floor " + (floor ? detail::fmt_double(*floor) : std::string("absent")) +
        " <= required " + detail::fmt_double(eta_min);

  for (int trial = 0; trial < config.trial_count; ++trial) {
    Engine engine(config, trial);
    TrialSeries series;
    series.lyap_grad_sq.push_back(engine.pending_diff_norm_sq());
    result.initial_gap = engine.initial_gap();
    result.f_zero = engine.initial_gap() + config.f_ref;
    for (int t = 1; t <= config.iterations && !engine.diverged(); ++t) {
      series.metrics.push_back(engine.step());
      series.lyap_grad_sq.push_back(engine.pending_diff_norm_sq());
    }
    series.diverged = engine.diverged();
    series.diverged_at = engine.diverged_at();
    result.trials.push_back(std::move(series));
  }
  return result;
}

/// Computed constants from the convergence statements: the feasibility
/// threshold, the bounded gradient-sum value, the rate coefficient C1, the
/// error-ball radius and the diminishing-schedule constant C2.
struct TheoryReport {
  double eta = 0.0;
  double eta_min = 0.0;
  bool feasible = false;
  double alpha = 0.0;
  double alpha_max = 0.0;
  double c1 = 0.0;
  double error_ball = 0.0;
  double gradient_sum_bound = 0.0;
  double c2 = 0.0;
};

inline TheoryReport theory_report(const RunConfig& config, const SpectralReport& rep,
                                  double l_smooth, double d_est) {
  TheoryReport r;
  const double lam_n = rep.lambda_n;
  const double beta = rep.beta;
  const int n = config.matrix.n;
  const double alpha = config.schedule.at(1);
  const std::optional<double> floor = config.compressor.snr_floor();
  const double eta = floor.value_or(0.0);
  r.eta = eta;
  r.eta_min = (1.0 - lam_n) / (1.0 + lam_n);
  r.alpha = alpha;
  r.alpha_max = (lam_n * (eta + 1.0) + eta - 1.0) / (l_smooth * (1.0 + eta));
  r.feasible = floor.has_value() && eta > r.eta_min && alpha <= r.alpha_max;

  const double f_gap = (config.objective ? config.objective->value(Vec(config.objective->dim, 0.0))
                                         : 0.0) -
                       config.f_ref;
  const double denom_thm1 =
      std::isinf(eta) ? 1.0 + lam_n - alpha * l_smooth
                      : 1.0 + lam_n - alpha * l_smooth - (1.0 - lam_n + alpha * l_smooth) / eta;
  r.gradient_sum_bound = 2.0 * alpha * f_gap / denom_thm1;

  const double c1_denom = std::isinf(eta)
                              ? std::numeric_limits<double>::infinity()
                              : (1.0 + lam_n - alpha * l_smooth) * eta -
                                    (1.0 - lam_n + alpha * l_smooth);
  const double c1_first =
      std::isinf(c1_denom) ? 0.0
                           : 4.0 * (alpha / (1.0 - beta * beta) + l_smooth / 2.0) / c1_denom;
  r.c1 = c1_first + 2.0 * n / alpha;

  const double nd = static_cast<double>(n) * d_est;
  r.error_ball = alpha * alpha * nd * nd * l_smooth / ((1.0 - beta) * (1.0 - beta));
  r.c2 = f_gap * (1.0 - beta) * (1.0 - beta) / (d_est * d_est * n * n * l_smooth);
  return r;
}

}  // namespace dcdgd
