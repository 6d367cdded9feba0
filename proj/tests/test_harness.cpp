#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcdgd/experiment.hpp"

using namespace dcdgd;

namespace {

const std::string kConfigsDir = std::string(DCDGD_SOURCE_DIR) + "/configs";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string temp_dir(const std::string& tag) {
  auto path = std::filesystem::temp_directory_path() / ("dcdgd_" + tag);
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

ExperimentConfig tiny_convergence_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentConfig::Kind::Convergence;
  cfg.seed = 5;
  cfg.out_dir = out_dir;
  cfg.matrix_file = kConfigsDir + "/w2.txt";
  cfg.topology_file = kConfigsDir + "/five_circle.topo";
  cfg.objective_kind = "synthetic5";
  cfg.dim = 3;
  cfg.compressor_labels = {"identity", "sparsifier:p=0.8"};
  cfg.schedule = StepSchedule::constant(0.05);
  cfg.iterations = 25;
  cfg.trials = 3;
  cfg.f_ref_policy = "zero";
  return cfg;
}

}  // namespace

TEST_CASE("key/value config parsing") {
  const std::string text =
      "# comment\n"
      "[experiment]\n"
      "kind = convergence\n"
      "seed = 9\n"
      "\n"
      "[run]\n"
      "compressors = identity, sparsifier:p=0.8\n"
      "step = 0.1\n"
      "iterations = 50\n"
      "trials = 4\n";
  KeyValueConfig kv = KeyValueConfig::parse_text(text);
  CHECK(kv.get("experiment.kind") == "convergence");
  CHECK(kv.get_int("experiment.seed") == 9);
  CHECK(kv.get_list("run.compressors") ==
        std::vector<std::string>{"identity", "sparsifier:p=0.8"});
  CHECK(kv.get_double("run.step") == doctest::Approx(0.1));
  CHECK_FALSE(kv.has("run.cost_mode"));

  ExperimentConfig cfg = load_experiment_config(kv);
  CHECK(cfg.kind == ExperimentConfig::Kind::Convergence);
  CHECK(cfg.trials == 4);
  CHECK(cfg.schedule.alpha == doctest::Approx(0.1));
}

TEST_CASE("config errors carry line context") {
  CHECK_THROWS_AS(KeyValueConfig::parse_text("[run]\nbad line\n"), ConfigError);
  try {
    KeyValueConfig::parse_text("[a]\nx = 1\nnonsense\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  KeyValueConfig kv = KeyValueConfig::parse_text("[experiment]\nkind = sideways\n");
  CHECK_THROWS_WITH_AS(load_experiment_config(kv), doctest::Contains("sideways"), ConfigError);
  KeyValueConfig missing = KeyValueConfig::parse_text("[experiment]\nkind = convergence\n");
  CHECK_THROWS_AS(load_experiment_config(missing), ConfigError);  // no run.compressors
}

TEST_CASE("schedule strings parse") {
  KeyValueConfig kv = KeyValueConfig::parse_text(
      "[experiment]\nkind = convergence\n[run]\ncompressors = identity\n"
      "schedule = sublinear:c2=0.008,cap=0.15\n");
  ExperimentConfig cfg = load_experiment_config(kv);
  CHECK(cfg.schedule.kind == StepSchedule::Kind::Sublinear);
  CHECK(cfg.schedule.c2 == doctest::Approx(0.008));
  CHECK(cfg.schedule.cap == doctest::Approx(0.15));

  KeyValueConfig both = KeyValueConfig::parse_text(
      "[experiment]\nkind = convergence\n[run]\ncompressors = identity\n"
      "step = 0.1\nschedule = constant:0.2\n");
  CHECK_THROWS_AS(load_experiment_config(both), ConfigError);
}

TEST_CASE("csv headers are pinned") {
  CHECK(std::string(kTrialCsvHeader) ==
        "trial,iteration,gap,grad_norm_sq,consensus_dev,lyapunov,cum_bits");
  CHECK(std::string(kSummaryCsvHeader) ==
        "config,iteration,gap_mean,gap_std,grad_norm_sq_mean,grad_norm_sq_std,"
        "consensus_dev_mean,consensus_dev_std,lyapunov_mean,lyapunov_std,cum_bits_mean,"
        "diverged_trials");
  CHECK(std::string(kCompareCsvHeader) ==
        "spec,target_db,d,vector,bias_norm,empirical_snr,empirical_snr_db,"
        "mean_model_cost_bits,trials");
}

TEST_CASE("sweep writes per-config and summary csv files with pinned headers") {
  const std::string out = temp_dir("sweep");
  ExperimentConfig cfg = tiny_convergence_config(out);
  SweepOutcome outcome = run_sweep(cfg);
  REQUIRE(outcome.entries.size() == 2);
  for (const auto& entry : outcome.entries) {
    const std::string content = slurp(entry.csv_path);
    CHECK(content.rfind(kTrialCsvHeader, 0) == 0);
    // header + trials * iterations rows
    CHECK(std::count(content.begin(), content.end(), '\n') == 1 + 3 * 25);
  }
  const std::string summary = slurp(outcome.summary_path);
  CHECK(summary.rfind(kSummaryCsvHeader, 0) == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 2 * 25);
  std::filesystem::remove_all(out);
}

TEST_CASE("summary statistics agree with an independent recomputation") {
  const std::string out = temp_dir("recompute");
  ExperimentConfig cfg = tiny_convergence_config(out);
  SweepOutcome outcome = run_sweep(cfg);

  // independent pass: parse the trial csv and aggregate by hand
  for (const auto& entry : outcome.entries) {
    std::ifstream in(entry.csv_path);
    std::string line;
    std::getline(in, line);  // header
    std::map<int, std::vector<double>> gaps_by_iter;
    while (std::getline(in, line)) {
      std::istringstream cells(line);
      std::string cell;
      std::vector<std::string> fields;
      while (std::getline(cells, cell, ',')) fields.push_back(cell);
      REQUIRE(fields.size() == 7);
      gaps_by_iter[std::stoi(fields[1])].push_back(std::stod(fields[2]));
    }
    for (const auto& row : outcome.summary) {
      if (row.config != entry.label) continue;
      const auto& gaps = gaps_by_iter.at(row.iteration);
      double mean = 0.0;
      for (double g : gaps) mean += g;
      mean /= gaps.size();
      double ss = 0.0;
      for (double g : gaps) ss += (g - mean) * (g - mean);
      const double sd = gaps.size() > 1 ? std::sqrt(ss / (gaps.size() - 1)) : 0.0;
      CHECK(std::abs(row.gap_mean - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
      CHECK(std::abs(row.gap_std - sd) <= 1e-12 * std::max(1.0, sd));
    }
  }
  std::filesystem::remove_all(out);
}

TEST_CASE("rerunning a sweep yields byte-identical csv output") {
  const std::string out_a = temp_dir("det_a");
  const std::string out_b = temp_dir("det_b");
  ExperimentConfig cfg_a = tiny_convergence_config(out_a);
  ExperimentConfig cfg_b = tiny_convergence_config(out_b);
  SweepOutcome a = run_sweep(cfg_a);
  SweepOutcome b = run_sweep(cfg_b);
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    CHECK(slurp(a.entries[i].csv_path) == slurp(b.entries[i].csv_path));
  CHECK(slurp(a.summary_path) == slurp(b.summary_path));
  std::filesystem::remove_all(out_a);
  std::filesystem::remove_all(out_b);
}

TEST_CASE("the dgd label runs the identity path bit for bit") {
  const std::string out = temp_dir("dgd_alias");
  ExperimentConfig cfg = tiny_convergence_config(out);
  cfg.compressor_labels = {"identity", "dgd"};
  SweepOutcome outcome = run_sweep(cfg);
  CHECK(slurp(outcome.entries[0].csv_path) == slurp(outcome.entries[1].csv_path));
  std::filesystem::remove_all(out);
}

TEST_CASE("matrix analysis reuses the module operations verbatim") {
  AnalyzeReport report = analyze_matrix_file(kConfigsDir + "/w1.txt",
                                             kConfigsDir + "/five_circle.topo", 2.0);
  REQUIRE(report.validation.ok);

  LoadResult loaded =
      load_matrix(read_matrix_file(kConfigsDir + "/w1.txt"), make_circle(5));
  SpectralReport direct = spectral(*loaded.matrix);
  TheoryThresholds thr = thresholds(direct, 2.0);
  CHECK(report.spectral_report.lambda_n == direct.lambda_n);
  CHECK(report.spectral_report.lambda2 == direct.lambda2);
  CHECK(report.spectral_report.beta == direct.beta);
  CHECK(report.thresholds_report.eta_min == thr.eta_min);
  CHECK(report.thresholds_report.p_min == thr.p_min);
  for (const auto& [eta, alpha] : report.alpha_table)
    CHECK(alpha == thr.alpha_max(eta));
}

TEST_CASE("matrix analysis surfaces validation failures") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "dcdgd_bad_matrix.txt").string();
  std::ofstream(path) << "2\n0.9 0.2\n0.2 0.8\n";  // row sums off
  AnalyzeReport report = analyze_matrix_file(path);
  CHECK_FALSE(report.validation.ok);
  std::remove(path.c_str());
}

TEST_CASE("decibel conversions match the stated working points") {
  CHECK(db_to_eta(0.0) == doctest::Approx(1.0));
  CHECK(std::abs(db_to_eta(3.0) - 2.0) <= 0.01);
  CHECK(eta_to_db(1.0) == doctest::Approx(0.0));
  const CompressorSpec sparsifier = spec_for_target("sparsifier", db_to_eta(3.0));
  CHECK(std::abs(sparsifier.p - 2.0 / 3.0) <= 0.01);
  const CompressorSpec hybrid = spec_for_target("hybrid", db_to_eta(3.0));
  CHECK(std::abs(hybrid.snr_bound - 2.0) <= 0.01);
  CHECK_THROWS(spec_for_target("nonsense", 1.0));
}

TEST_CASE("compressor comparison emits one row per cell") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentConfig::Kind::Compare;
  cfg.seed = 3;
  cfg.out_dir = temp_dir("compare");
  cfg.compressor_labels = {"sparsifier", "ternary", "hybrid"};
  cfg.compare_dims = {10};
  cfg.compare_vectors = 4;
  cfg.compare_trials = 60;
  cfg.targets_db = {0.0, 3.0};
  CompareOutcome outcome = run_compare(cfg);
  CHECK(outcome.rows.size() == 2u * 3u * 1u * 4u);
  const std::string content = slurp(outcome.csv_path);
  CHECK(content.rfind(kCompareCsvHeader, 0) == 0);
  CHECK(std::count(content.begin(), content.end(), '\n') == 1 + 24);
  CHECK(outcome.mean_cost("sparsifier", 0.0) > 0.0);
  // the same vectors feed every operator, so identity is exact per vector
  for (const auto& row : outcome.rows)
    if (row.spec_label == "ternary") CHECK(row.stats.bias_norm < 1.0);
  std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("real-data pipeline runs end to end on a synthetic csv") {
  // synthetic dataset in the native layout: 57 features + trailing 0/1 label
  const std::string dir = temp_dir("realdata");
  const std::string csv_path = dir + "/toy.csv";
  {
    RandomStream rng = RandomStream::derive(99, 0xda7a5e7);
    Vec w = rng.gaussian_vector(57);
    std::ofstream out(csv_path);
    for (int r = 0; r < 220; ++r) {
      Vec row = rng.gaussian_vector(57);
      const double score = dot(row, w) + rng.next_gaussian();
      for (int c = 0; c < 57; ++c) out << detail::csv_num(row[c]) << ',';
      out << (score > 0 ? 1 : 0) << "\n";
    }
  }

  ExperimentConfig cfg;
  cfg.kind = ExperimentConfig::Kind::RealData;
  cfg.seed = 4;
  cfg.out_dir = dir + "/out";
  cfg.topology_file = kConfigsDir + "/ten_circle.topo";
  cfg.weights = "lazy-metropolis";
  cfg.objective_kind = "logistic";
  cfg.dataset_path = csv_path;
  cfg.rho = 0.1;
  cfg.nodes = 10;
  cfg.compressor_labels = {"identity", "hybrid:C=4"};
  cfg.schedule = StepSchedule::constant(0.05);
  cfg.iterations = 40;
  cfg.trials = 2;
  cfg.allow_snr_violation = true;
  cfg.f_ref_policy = "zero";
  SweepOutcome outcome = run_sweep(cfg);
  REQUIRE(outcome.entries.size() == 2);
  for (const auto& entry : outcome.entries) {
    CHECK(entry.result.diverged_trials() == 0);
    // loss decreases from the start for both runs
    double final_gap = 0.0;
    for (const auto& trial : entry.result.trials) final_gap += trial.metrics.back().gap;
    final_gap /= static_cast<double>(entry.result.trials.size());
    CHECK(final_gap < entry.result.initial_gap);
  }
  // trial-averaged identity loss is non-increasing once past the first steps
  {
    const auto& identity = outcome.entries[0].result;
    std::vector<double> mean_gap(cfg.iterations, 0.0);
    for (const auto& trial : identity.trials)
      for (int t = 0; t < cfg.iterations; ++t)
        mean_gap[t] += trial.metrics[t].gap / static_cast<double>(identity.trials.size());
    for (int t = 10; t < cfg.iterations; ++t) CHECK(mean_gap[t] <= mean_gap[t - 1] + 1e-12);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing dataset produces an actionable message and no download") {
  ExperimentConfig cfg;
  cfg.kind = ExperimentConfig::Kind::RealData;
  cfg.objective_kind = "logistic";
  cfg.dataset_path = "/nonexistent/spambase.data";
  cfg.compressor_labels = {"identity"};
  CHECK_THROWS_WITH_AS(build_objective_from_config(cfg), doctest::Contains("no download"),
                       std::runtime_error);
}
