#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcdgd/engine.hpp"

namespace dcdgd {

struct ConfigError : std::runtime_error {
  int line;
  ConfigError(int line_no, const std::string& what)
      : std::runtime_error(line_no > 0 ? "config line " + std::to_string(line_no) + ": " + what
                                       : "config: " + what),
        line(line_no) {}
};

/// Flat key/value text with [section] headers; keys are addressed as
/// "section.key". Lines starting with # are comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    KeyValueConfig cfg = parse_text(buf.str());
    cfg.base_dir_ = std::filesystem::path(path).parent_path().string();
    return cfg;
  }

  static KeyValueConfig parse_text(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#') continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(line_no, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (section.empty()) throw ConfigError(line_no, "empty section name");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
      const std::string key = trim(s.substr(0, eq));
      if (key.empty()) throw ConfigError(line_no, "empty key");
      if (section.empty()) throw ConfigError(line_no, "key outside any [section]");
      cfg.values_[section + "." + key] = {trim(s.substr(eq + 1)), line_no};
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError(0, "missing required key '" + key + "'");
    return it->second.text;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.text;
  }

  double get_double(const std::string& key) const { return to_double(key, get(key)); }

  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) const {
    const std::string v = get(key);
    try {
      return std::stoll(v);
    } catch (const std::exception&) {
      throw ConfigError(line_of(key), "key '" + key + "': cannot parse integer '" + v + "'");
    }
  }

  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(line_of(key), "key '" + key + "': expected boolean, got '" + v + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> items;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) items.push_back(t);
    }
    if (items.empty()) throw ConfigError(line_of(key), "key '" + key + "': empty list");
    return items;
  }

  /// Relative paths are resolved against the config file's directory.
  std::string resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute() || base_dir_.empty()) return value;
    return (std::filesystem::path(base_dir_) / p).string();
  }

  int line_of(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
  }

 private:
  struct Entry {
    std::string text;
    int line = 0;
  };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  double to_double(const std::string& key, const std::string& v) const {
    try {
      return std::stod(v);
    } catch (const std::exception&) {
      throw ConfigError(line_of(key), "key '" + key + "': cannot parse number '" + v + "'");
    }
  }

  std::map<std::string, Entry> values_;
  std::string base_dir_;
};

inline double db_to_eta(double db) { return std::pow(10.0, db / 10.0); }
inline double eta_to_db(double eta) { return 10.0 * std::log10(eta); }

namespace detail {

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string sanitize_label(const std::string& label) {
  std::string out;
  for (char c : label) out.push_back((std::isalnum(static_cast<unsigned char>(c)) ||
                                      c == '.' || c == '-')
                                         ? c
                                         : '_');
  return out;
}

}  // namespace detail

inline constexpr const char* kTrialCsvHeader =
    "trial,iteration,gap,grad_norm_sq,consensus_dev,lyapunov,cum_bits";
inline constexpr const char* kSummaryCsvHeader =
    "config,iteration,gap_mean,gap_std,grad_norm_sq_mean,grad_norm_sq_std,"
    "consensus_dev_mean,consensus_dev_std,lyapunov_mean,lyapunov_std,cum_bits_mean,"
    "diverged_trials";
inline constexpr const char* kCompareCsvHeader =
    "spec,target_db,d,vector,bias_norm,empirical_snr,empirical_snr_db,mean_model_cost_bits,"
    "trials";

struct SummaryRow {
  std::string config;
  int iteration = 0;
  double gap_mean = 0.0, gap_std = 0.0;
  double grad_norm_sq_mean = 0.0, grad_norm_sq_std = 0.0;
  double consensus_dev_mean = 0.0, consensus_dev_std = 0.0;
  double lyapunov_mean = 0.0, lyapunov_std = 0.0;
  double cum_bits_mean = 0.0;
  int diverged_trials = 0;
};

/// Pads truncated (diverged) trials by repeating their clipped final row so
/// every (trial, iteration) pair exists.
inline std::vector<IterationMetrics> padded_series(const TrialSeries& trial, int iterations) {
  std::vector<IterationMetrics> rows = trial.metrics;
  while (static_cast<int>(rows.size()) < iterations) {
    IterationMetrics m = rows.empty() ? IterationMetrics{} : rows.back();
    m.t = static_cast<int>(rows.size()) + 1;
    rows.push_back(m);
  }
  return rows;
}

inline std::vector<SummaryRow> summarize(const std::string& config_label, const RunResult& result,
                                         int iterations) {
  std::vector<std::vector<IterationMetrics>> padded;
  padded.reserve(result.trials.size());
  for (const auto& trial : result.trials) padded.push_back(padded_series(trial, iterations));
  const int trials = static_cast<int>(padded.size());

  std::vector<SummaryRow> rows;
  rows.reserve(iterations);
  for (int t = 0; t < iterations; ++t) {
    SummaryRow row;
    row.config = config_label;
    row.iteration = t + 1;
    row.diverged_trials = result.diverged_trials();
    auto stats = [&](auto&& pick, double& mean_out, double& std_out) {
      double mean = 0.0;
      for (int k = 0; k < trials; ++k) mean += pick(padded[k][t]);
      mean /= trials;
      double ss = 0.0;
      for (int k = 0; k < trials; ++k) {
        const double dv = pick(padded[k][t]) - mean;
        ss += dv * dv;
      }
      mean_out = mean;
      std_out = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
    };
    stats([](const IterationMetrics& m) { return m.gap; }, row.gap_mean, row.gap_std);
    stats([](const IterationMetrics& m) { return m.grad_norm_sq; }, row.grad_norm_sq_mean,
          row.grad_norm_sq_std);
    stats([](const IterationMetrics& m) { return m.consensus_dev; }, row.consensus_dev_mean,
          row.consensus_dev_std);
    stats([](const IterationMetrics& m) { return m.lyapunov; }, row.lyapunov_mean,
          row.lyapunov_std);
    double bits = 0.0;
    for (int k = 0; k < trials; ++k) bits += static_cast<double>(padded[k][t].cum_bits);
    row.cum_bits_mean = bits / trials;
    rows.push_back(row);
  }
  return rows;
}

inline void write_trial_csv(const std::string& path, const RunResult& result, int iterations) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kTrialCsvHeader << "\n";
  for (std::size_t k = 0; k < result.trials.size(); ++k) {
    for (const IterationMetrics& m : padded_series(result.trials[k], iterations)) {
      out << k << ',' << m.t << ',' << detail::csv_num(m.gap) << ','
          << detail::csv_num(m.grad_norm_sq) << ',' << detail::csv_num(m.consensus_dev) << ','
          << detail::csv_num(m.lyapunov) << ',' << m.cum_bits << "\n";
    }
  }
}

inline void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kSummaryCsvHeader << "\n";
  for (const SummaryRow& r : rows) {
    out << r.config << ',' << r.iteration << ',' << detail::csv_num(r.gap_mean) << ','
        << detail::csv_num(r.gap_std) << ',' << detail::csv_num(r.grad_norm_sq_mean) << ','
        << detail::csv_num(r.grad_norm_sq_std) << ',' << detail::csv_num(r.consensus_dev_mean)
        << ',' << detail::csv_num(r.consensus_dev_std) << ',' << detail::csv_num(r.lyapunov_mean)
        << ',' << detail::csv_num(r.lyapunov_std) << ',' << detail::csv_num(r.cum_bits_mean)
        << ',' << r.diverged_trials << "\n";
  }
}

// ---------------------------------------------------------------------------
// experiment configs

struct ExperimentConfig {
  enum class Kind { Convergence, Compare, RealData };
  Kind kind = Kind::Convergence;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  // matrix source: either a matrix file or a topology plus a builder name
  std::string matrix_file;
  std::string topology_file;
  std::string weights = "metropolis";

  // objective
  std::string objective_kind = "synthetic5";  // synthetic5 | logistic
  int dim = 10;
  std::string dataset_path;
  std::optional<std::uint64_t> dataset_checksum;
  double rho = 0.1;
  int nodes = 10;
  bool standardize = true;

  // run section
  std::vector<std::string> compressor_labels;
  StepSchedule schedule;
  int iterations = 300;
  int trials = 1;
  CostModel cost_model;
  CostAccounting cost_accounting = CostAccounting::BroadcastOnce;
  bool allow_snr_violation = false;
  std::string f_ref_policy = "gd";  // zero | gd | value:<x>
  double f_ref_value = 0.0;
  int f_ref_iters = 100000;
  std::optional<double> f_ref_step;

  // compare section
  std::vector<int> compare_dims{20, 50};
  int compare_vectors = 20;
  int compare_trials = 100;
  std::vector<double> targets_db{0.0, 3.0};
};

inline StepSchedule parse_schedule(const KeyValueConfig& kv) {
  if (kv.has("run.step") && kv.has("run.schedule"))
    throw ConfigError(kv.line_of("run.schedule"), "give either run.step or run.schedule");
  if (kv.has("run.step")) return StepSchedule::constant(kv.get_double("run.step"));
  if (!kv.has("run.schedule")) return StepSchedule::constant(0.1);
  const std::string text = kv.get("run.schedule");
  if (text.rfind("constant:", 0) == 0)
    return StepSchedule::constant(std::stod(text.substr(9)));
  if (text.rfind("sublinear:", 0) == 0) {
    double c2 = 1.0, cap = std::numeric_limits<double>::infinity();
    std::istringstream in(text.substr(10));
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ConfigError(kv.line_of("run.schedule"), "bad schedule parameter '" + item + "'");
      const std::string key = item.substr(0, eq);
      const double value = std::stod(item.substr(eq + 1));
      if (key == "c2")
        c2 = value;
      else if (key == "cap")
        cap = value;
      else
        throw ConfigError(kv.line_of("run.schedule"), "unknown schedule parameter '" + key + "'");
    }
    return StepSchedule::sublinear(c2, cap);
  }
  throw ConfigError(kv.line_of("run.schedule"), "unknown schedule '" + text + "'");
}

inline ExperimentConfig load_experiment_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  const std::string kind = kv.get("experiment.kind");
  if (kind == "convergence")
    cfg.kind = ExperimentConfig::Kind::Convergence;
  else if (kind == "compare-compressors")
    cfg.kind = ExperimentConfig::Kind::Compare;
  else if (kind == "real-data")
    cfg.kind = ExperimentConfig::Kind::RealData;
  else
    throw ConfigError(kv.line_of("experiment.kind"), "unknown experiment kind '" + kind + "'");

  cfg.seed = static_cast<std::uint64_t>(kv.get_int_or("experiment.seed", 1));
  cfg.out_dir = kv.get_or("experiment.out_dir", "out");

  if (kv.has("matrix.file")) {
    cfg.matrix_file = kv.resolve_path(kv.get("matrix.file"));
    if (!std::filesystem::exists(cfg.matrix_file))
      throw ConfigError(kv.line_of("matrix.file"), "matrix file not found: " + cfg.matrix_file);
  }
  if (kv.has("matrix.topology")) {
    cfg.topology_file = kv.resolve_path(kv.get("matrix.topology"));
    if (!std::filesystem::exists(cfg.topology_file))
      throw ConfigError(kv.line_of("matrix.topology"),
                        "topology file not found: " + cfg.topology_file);
  }
  cfg.weights = kv.get_or("matrix.weights", "metropolis");

  cfg.objective_kind = kv.get_or("objective.kind", "synthetic5");
  cfg.dim = static_cast<int>(kv.get_int_or("objective.dim", 10));
  if (kv.has("objective.dataset")) cfg.dataset_path = kv.resolve_path(kv.get("objective.dataset"));
  if (kv.has("objective.checksum"))
    cfg.dataset_checksum = std::stoull(kv.get("objective.checksum"), nullptr, 16);
  cfg.rho = kv.get_double_or("objective.rho", 0.1);
  cfg.nodes = static_cast<int>(kv.get_int_or("objective.nodes", 10));
  cfg.standardize = kv.get_bool_or("objective.standardize", true);

  if (cfg.kind != ExperimentConfig::Kind::Compare) {
    for (const std::string& label : kv.get_list("run.compressors")) {
      parse_compressor_spec(label);  // validate early, with config context
      cfg.compressor_labels.push_back(label);
    }
    cfg.schedule = parse_schedule(kv);
    cfg.iterations = static_cast<int>(kv.get_int_or("run.iterations", 300));
    cfg.trials = static_cast<int>(kv.get_int_or("run.trials", 1));
    const std::string mode = kv.get_or("run.cost_mode", "broadcast");
    if (mode == "broadcast")
      cfg.cost_accounting = CostAccounting::BroadcastOnce;
    else if (mode == "per-link")
      cfg.cost_accounting = CostAccounting::PerLink;
    else
      throw ConfigError(kv.line_of("run.cost_mode"), "unknown cost_mode '" + mode + "'");
    cfg.allow_snr_violation = kv.get_bool_or("run.allow_snr_violation", false);
    cfg.cost_model.c1 = static_cast<int>(kv.get_int_or("run.cost_c1", 32));
    cfg.cost_model.c0 = static_cast<int>(kv.get_int_or("run.cost_c0", 1));
    cfg.cost_model.c0t = static_cast<int>(kv.get_int_or("run.cost_c0t", 2));

    const std::string policy = kv.get_or("run.f_ref", "gd");
    if (policy == "zero") {
      cfg.f_ref_policy = "zero";
    } else if (policy == "gd") {
      cfg.f_ref_policy = "gd";
    } else if (policy.rfind("value:", 0) == 0) {
      cfg.f_ref_policy = "value";
      cfg.f_ref_value = std::stod(policy.substr(6));
    } else {
      throw ConfigError(kv.line_of("run.f_ref"), "unknown f_ref policy '" + policy + "'");
    }
    cfg.f_ref_iters = static_cast<int>(kv.get_int_or("run.f_ref_iters", 100000));
    if (kv.has("run.f_ref_step")) cfg.f_ref_step = kv.get_double("run.f_ref_step");
  } else {
    cfg.compressor_labels = kv.get_list("compare.compressors");
    cfg.compare_dims.clear();
    for (const std::string& d : kv.get_list("compare.dims"))
      cfg.compare_dims.push_back(std::stoi(d));
    cfg.compare_vectors = static_cast<int>(kv.get_int_or("compare.vectors", 20));
    cfg.compare_trials = static_cast<int>(kv.get_int_or("compare.trials", 100));
    cfg.targets_db.clear();
    for (const std::string& t : kv.get_list("compare.targets_db"))
      cfg.targets_db.push_back(std::stod(t));
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// preflight matrix analysis

struct AnalyzeReport {
  MatrixValidation validation;
  SpectralReport spectral_report;
  TheoryThresholds thresholds_report;
  std::vector<std::pair<double, double>> alpha_table;  // (eta, alpha_max)
};

inline AnalyzeReport analyze_matrix(const ConsensusMatrix& m, double l_smooth = 1.0) {
  AnalyzeReport report;
  report.validation = validate_structure(m.weights, m.topology);
  report.spectral_report = spectral(m);
  validate_spectrum(report.spectral_report, report.validation);
  report.thresholds_report = thresholds(report.spectral_report, l_smooth);
  const double eta_min = report.thresholds_report.eta_min;
  for (double eta : {eta_min * 1.1, 1.0, 2.0, 4.0})
    report.alpha_table.emplace_back(eta, report.thresholds_report.alpha_max(eta));
  return report;
}

inline AnalyzeReport analyze_matrix_file(const std::string& matrix_path,
                                         const std::string& topology_path = "",
                                         double l_smooth = 1.0) {
  const Matrix raw = read_matrix_file(matrix_path);
  const Topology topo =
      topology_path.empty() ? implied_topology(raw) : read_topology_file(topology_path);
  LoadResult loaded = load_matrix(raw, topo);
  if (!loaded.matrix) {
    AnalyzeReport report;
    report.validation = loaded.validation;
    return report;
  }
  return analyze_matrix(*loaded.matrix, l_smooth);
}

// ---------------------------------------------------------------------------
// experiment runners

inline ConsensusMatrix build_matrix_from_config(const ExperimentConfig& cfg) {
  if (!cfg.matrix_file.empty()) {
    const Matrix raw = read_matrix_file(cfg.matrix_file);
    const Topology topo = cfg.topology_file.empty() ? implied_topology(raw)
                                                    : read_topology_file(cfg.topology_file);
    LoadResult loaded = load_matrix(raw, topo);
    if (!loaded.matrix) {
      std::string why = "matrix file " + cfg.matrix_file + " failed validation:";
      for (const auto& v : loaded.validation.violations) why += "\n  " + v;
      throw std::runtime_error(why);
    }
    return std::move(*loaded.matrix);
  }
  if (cfg.topology_file.empty())
    throw std::runtime_error("config needs either matrix.file or matrix.topology");
  const Topology topo = read_topology_file(cfg.topology_file);
  if (cfg.weights == "metropolis") return build_metropolis(topo);
  if (cfg.weights == "lazy-metropolis") return build_lazy_metropolis(topo);
  throw std::runtime_error("unknown matrix.weights '" + cfg.weights + "'");
}

inline std::shared_ptr<const GlobalObjective> build_objective_from_config(
    const ExperimentConfig& cfg) {
  if (cfg.objective_kind == "synthetic5") {
    auto obj = std::make_shared<GlobalObjective>(make_synthetic_five(cfg.seed, cfg.dim));
    return obj;
  }
  if (cfg.objective_kind == "logistic") {
    if (cfg.dataset_path.empty())
      throw std::runtime_error("logistic objective requires objective.dataset");
    if (!std::filesystem::exists(cfg.dataset_path))
      throw std::runtime_error(
          "dataset file not found: " + cfg.dataset_path +
          "\nExpected a comma-separated file with 57 numeric feature columns and a trailing "
          "0/1 label per row (the UCI Spambase layout). Download spambase.data from the UCI "
          "repository and place it at that path; no download is attempted.");
    auto ds = std::make_shared<const Dataset>(load_csv_dataset(
        cfg.dataset_path, 57, 57, cfg.dataset_checksum, cfg.standardize));
    const Partition part = partition_even(*ds, cfg.nodes, cfg.seed);
    auto obj = std::make_shared<GlobalObjective>(make_logistic_global(ds, part, cfg.rho));
    return obj;
  }
  throw std::runtime_error("unknown objective.kind '" + cfg.objective_kind + "'");
}

inline double resolve_f_ref(const ExperimentConfig& cfg, const GlobalObjective& obj) {
  if (cfg.f_ref_policy == "zero") return 0.0;
  if (cfg.f_ref_policy == "value") return cfg.f_ref_value;
  const double step = cfg.f_ref_step ? *cfg.f_ref_step : 0.5 / std::max(obj.l_est_sum(), 1e-12);
  return centralized_gd_reference(obj, cfg.f_ref_iters, step);
}

struct SweepEntry {
  std::string label;
  CompressorSpec spec;
  RunResult result;
  std::string csv_path;
};

struct SweepOutcome {
  std::vector<SweepEntry> entries;
  std::vector<SummaryRow> summary;
  std::string summary_path;
  double f_ref = 0.0;
  bool all_converged = true;
};

/// Shared driver for the convergence and real-data experiments: one run per
/// compressor label, per-trial CSVs plus one summary CSV.
inline SweepOutcome run_sweep(const ExperimentConfig& cfg) {
  SweepOutcome outcome;
  ConsensusMatrix matrix = build_matrix_from_config(cfg);
  auto objective = build_objective_from_config(cfg);
  outcome.f_ref = resolve_f_ref(cfg, *objective);

  std::filesystem::create_directories(cfg.out_dir);
  int index = 0;
  for (const std::string& label : cfg.compressor_labels) {
    RunConfig rc;
    rc.matrix = matrix;
    rc.objective = objective;
    rc.compressor = parse_compressor_spec(label);
    rc.schedule = cfg.schedule;
    rc.iterations = cfg.iterations;
    rc.master_seed = cfg.seed;
    rc.trial_count = cfg.trials;
    rc.cost_model = cfg.cost_model;
    rc.cost_accounting = cfg.cost_accounting;
    rc.allow_snr_violation = cfg.allow_snr_violation;
    rc.f_ref = outcome.f_ref;

    SweepEntry entry;
    entry.label = label;
    entry.spec = rc.compressor;
    entry.result = run(rc);
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "%02d_", index++);
    entry.csv_path = (std::filesystem::path(cfg.out_dir) /
                      (std::string(prefix) + detail::sanitize_label(label) + ".csv"))
                         .string();
    write_trial_csv(entry.csv_path, entry.result, cfg.iterations);
    if (entry.result.diverged_trials() > 0) outcome.all_converged = false;
    auto rows = summarize(label, entry.result, cfg.iterations);
    outcome.summary.insert(outcome.summary.end(), rows.begin(), rows.end());
    outcome.entries.push_back(std::move(entry));
  }
  outcome.summary_path = (std::filesystem::path(cfg.out_dir) / "summary.csv").string();
  write_summary_csv(outcome.summary_path, outcome.summary);
  return outcome;
}

// ---------------------------------------------------------------------------
// compressor comparison experiment

struct CompareRow {
  std::string spec_label;
  double target_db = 0.0;
  int d = 0;
  int vector_index = 0;
  CompressorStats stats;
};

struct CompareOutcome {
  std::vector<CompareRow> rows;
  std::string csv_path;

  double mean_cost(const std::string& spec_label, double target_db) const {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows)
      if (r.spec_label == spec_label && r.target_db == target_db) {
        sum += r.stats.mean_model_cost_bits;
        ++count;
      }
    return count ? sum / count : 0.0;
  }
};

/// Realizes a compressor family member for an SNR target given in dB:
/// the sparsifier keep probability becomes eta/(1+eta) and the hybrid bound
/// becomes eta; identity and ternary have no tunable parameter.
inline CompressorSpec spec_for_target(const std::string& family, double eta) {
  if (family == "sparsifier") return CompressorSpec::sparsifier(eta / (1.0 + eta));
  if (family == "hybrid") return CompressorSpec::hybrid(eta);
  if (family == "ternary") return CompressorSpec::ternary();
  if (family == "identity" || family == "dgd") return CompressorSpec::identity();
  throw std::runtime_error("unknown compressor family '" + family + "'");
}

inline CompareOutcome run_compare(const ExperimentConfig& cfg) {
  CompareOutcome outcome;
  std::filesystem::create_directories(cfg.out_dir);
  outcome.csv_path = (std::filesystem::path(cfg.out_dir) / "compare.csv").string();

  for (std::size_t target_idx = 0; target_idx < cfg.targets_db.size(); ++target_idx) {
    const double db = cfg.targets_db[target_idx];
    const double eta = db_to_eta(db);
    for (std::size_t spec_idx = 0; spec_idx < cfg.compressor_labels.size(); ++spec_idx) {
      const std::string& family = cfg.compressor_labels[spec_idx];
      const CompressorSpec spec = spec_for_target(family, eta);
      for (int d : cfg.compare_dims) {
        for (int vec = 0; vec < cfg.compare_vectors; ++vec) {
          // the same vectors are fed to every operator and target
          RandomStream vec_rng = RandomStream::derive(cfg.seed, 0xc0ffee,
                                                      static_cast<std::uint64_t>(d),
                                                      static_cast<std::uint64_t>(vec));
          const Vec z = vec_rng.gaussian_vector(d);
          RandomStream trial_rng = RandomStream::derive(
              cfg.seed, 0xe57a + target_idx * 64 + spec_idx,
              static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(vec));
          CompareRow row;
          row.spec_label = family;
          row.target_db = db;
          row.d = d;
          row.vector_index = vec;
          row.stats = estimate_stats(spec, z, cfg.compare_trials, trial_rng, cfg.cost_model);
          outcome.rows.push_back(std::move(row));
        }
      }
    }
  }

  std::ofstream out(outcome.csv_path);
  if (!out) throw std::runtime_error("cannot write " + outcome.csv_path);
  out << kCompareCsvHeader << "\n";
  for (const auto& r : outcome.rows) {
    out << r.spec_label << ',' << detail::csv_num(r.target_db) << ',' << r.d << ','
        << r.vector_index << ',' << detail::csv_num(r.stats.bias_norm) << ','
        << detail::csv_num(r.stats.empirical_snr) << ','
        << detail::csv_num(eta_to_db(r.stats.empirical_snr)) << ','
        << detail::csv_num(r.stats.mean_model_cost_bits) << ',' << r.stats.trials << "\n";
  }
  return outcome;
}

}  // namespace dcdgd
