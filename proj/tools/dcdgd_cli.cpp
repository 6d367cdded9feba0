// Command-line experiment runner: consensus-matrix analysis, convergence
// sweeps, compressor comparison and the real-data experiment.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dcdgd/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> trials;
  std::optional<int> iterations;

  void apply(dcdgd::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (trials) cfg.trials = *trials;
    if (iterations) cfg.iterations = *iterations;
  }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "override experiment.seed");
  cmd->add_option("--out-dir", ov.out_dir, "override experiment.out_dir");
  cmd->add_option("--trials", ov.trials, "override run.trials");
  cmd->add_option("--iterations", ov.iterations, "override run.iterations");
}

int cmd_analyze_matrix(const std::string& matrix_path, const std::string& topology_path,
                       double l_smooth) {
  dcdgd::AnalyzeReport report = dcdgd::analyze_matrix_file(matrix_path, topology_path, l_smooth);
  if (!report.validation.ok) {
    std::printf("matrix %s: INVALID\n", matrix_path.c_str());
    for (const auto& v : report.validation.violations) std::printf("  - %s\n", v.c_str());
    return kExitConfigError;
  }
  const auto& spec = report.spectral_report;
  const auto& thr = report.thresholds_report;
  std::printf("matrix %s: valid (doubly stochastic, symmetric, sparsity matches topology)\n",
              matrix_path.c_str());
  std::printf("  n                = %zu\n", spec.eigenvalues.size());
  std::printf("  lambda_2         = %.6f\n", spec.lambda2);
  std::printf("  lambda_N         = %.6f\n", spec.lambda_n);
  std::printf("  beta             = %.6f%s\n", spec.beta,
              spec.degenerate_complete ? " (degenerate complete-graph case)" : "");
  std::printf("  eigen residual   = %.3g\n", spec.max_pair_residual);
  std::printf("  eta_min          = %.6f\n", thr.eta_min);
  std::printf("  sparsifier p_min = %.6f\n", thr.p_min);
  std::printf("  alpha_max table (L = %g; scales as 1/L):\n", l_smooth);
  for (const auto& [eta, alpha] : report.alpha_table) {
    if (alpha > 0.0)
      std::printf("    eta = %-10.6g alpha_max = %.6g\n", eta, alpha);
    else
      std::printf("    eta = %-10.6g infeasible (eta <= eta_min)\n", eta);
  }
  return kExitOk;
}

int run_sweep_command(const std::string& config_path, const Overrides& ov,
                      dcdgd::ExperimentConfig::Kind expected, const char* command_name) {
  dcdgd::KeyValueConfig kv = dcdgd::KeyValueConfig::parse_file(config_path);
  dcdgd::ExperimentConfig cfg = dcdgd::load_experiment_config(kv);
  if (cfg.kind != expected)
    throw std::runtime_error(std::string("config kind does not match the '") + command_name +
                             "' command");
  ov.apply(cfg);
  dcdgd::SweepOutcome outcome = dcdgd::run_sweep(cfg);
  std::printf("f_ref = %.12g\n", outcome.f_ref);
  for (const auto& entry : outcome.entries) {
    const int diverged = entry.result.diverged_trials();
    std::printf("%-24s trials=%zu diverged=%d feasible=%s -> %s\n", entry.label.c_str(),
                entry.result.trials.size(), diverged,
                entry.result.theory_feasible ? "yes" : "no", entry.csv_path.c_str());
    if (!entry.result.theory_feasible)
      std::printf("  note: %s\n", entry.result.feasibility_note.c_str());
  }
  std::printf("summary -> %s\n", outcome.summary_path.c_str());
  return outcome.all_converged ? kExitOk : kExitDiverged;
}

int cmd_compare(const std::string& config_path, const Overrides& ov) {
  dcdgd::KeyValueConfig kv = dcdgd::KeyValueConfig::parse_file(config_path);
  dcdgd::ExperimentConfig cfg = dcdgd::load_experiment_config(kv);
  if (cfg.kind != dcdgd::ExperimentConfig::Kind::Compare)
    throw std::runtime_error("config kind does not match the 'compare-compressors' command");
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;
  if (ov.trials) cfg.compare_trials = *ov.trials;
  dcdgd::CompareOutcome outcome = dcdgd::run_compare(cfg);
  for (double db : cfg.targets_db) {
    std::printf("target %.3g dB:\n", db);
    for (const auto& family : cfg.compressor_labels) {
      std::printf("  %-12s mean model cost = %10.2f bits\n", family.c_str(),
                  outcome.mean_cost(family, db));
    }
  }
  std::printf("rows -> %s\n", outcome.csv_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differential-coded compressed decentralized gradient descent toolkit"};
  app.require_subcommand(1);

  std::string matrix_path, topology_path, config_path;
  double l_smooth = 1.0;
  Overrides ov;

  CLI::App* analyze = app.add_subcommand("analyze-matrix",
                                         "validate a consensus matrix and report its spectrum "
                                         "and feasibility thresholds");
  analyze->add_option("matrix", matrix_path, "matrix file")->required();
  analyze->add_option("topology", topology_path, "optional topology file");
  analyze->add_option("--L", l_smooth, "smoothness constant for the alpha_max table");

  CLI::App* run_cmd = app.add_subcommand("run", "convergence experiment over a compressor sweep");
  run_cmd->add_option("config", config_path, "experiment config file")->required();
  add_override_flags(run_cmd, ov);

  CLI::App* compare_cmd =
      app.add_subcommand("compare-compressors", "bias/SNR/cost comparison on Gaussian vectors");
  compare_cmd->add_option("config", config_path, "experiment config file")->required();
  add_override_flags(compare_cmd, ov);

  CLI::App* real_cmd =
      app.add_subcommand("real-data", "distributed logistic regression on a local dataset");
  real_cmd->add_option("config", config_path, "experiment config file")->required();
  add_override_flags(real_cmd, ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return cmd_analyze_matrix(matrix_path, topology_path, l_smooth);
    if (run_cmd->parsed())
      return run_sweep_command(config_path, ov, dcdgd::ExperimentConfig::Kind::Convergence,
                               "run");
    if (compare_cmd->parsed()) return cmd_compare(config_path, ov);
    if (real_cmd->parsed())
      return run_sweep_command(config_path, ov, dcdgd::ExperimentConfig::Kind::RealData,
                               "real-data");
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfigError;
  }
  return kExitOk;
}
