#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "htbench/data.hpp"
#include "htbench/metrics.hpp"
#include "htbench/models.hpp"

namespace htbench {

/// One benchmark target. `kind` is alpha_stable_iso, alpha_stable_mix,
/// tabular or gaussian.
struct DatasetConfig {
  std::string name;
  std::string kind = "alpha_stable_iso";
  std::size_t dim = 30;
  double alpha = 1.7;
  MixtureConfig mixture;
  std::string path;          // tabular only
  bool standardize = false;  // tabular only
  double mean = 0.0;         // gaussian only
  double std = 1.0;          // gaussian only

  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
};

Dataset make_dataset(const DatasetConfig& cfg, std::size_t n, std::uint64_t seed);

/// Pilot grid: learning rates for every family, sigma_max for DDPM and GF-Linear.
struct PilotGrid {
  bool enabled = true;
  std::size_t samples = 4096;
  std::vector<double> learning_rates{2e-4, 5e-4};
  std::vector<double> sigma_max_values{2.0, 5.0};
  std::size_t steps = 256;
  std::size_t trials = 3;
  std::size_t epochs = 16;
  std::size_t batch = 1024;
  std::size_t depth = 4;
  std::size_t width = 256;
  std::size_t t_embed_dim = 128;

  void validate() const;
};

struct MainConfig {
  std::size_t samples = 50000;
  std::size_t epochs = 512;
  std::size_t trials = 20;
  std::size_t batch = 1024;
  std::size_t steps = 512;
  std::size_t depth = 5;
  std::size_t width = 256;
  std::size_t t_embed_dim = 128;
  std::vector<double> dlpm_alphas{1.7, 1.9};
  TceLevels levels;

  void validate() const;
};

/// Optimization settings picked for one (dataset, model) pair.
struct Selection {
  double lr = 2e-4;
  double sigma_max = 1.0;
  double objective = 0.0;  // mean validation objective in the pilot
};

/// Keyed by "<dataset>/<model key>".
using SelectionMap = std::map<std::string, Selection>;

std::string selection_key(const std::string& dataset, const ModelSpec& model);

struct BenchConfig {
  std::vector<DatasetConfig> datasets;
  std::vector<Family> families{Family::gf_linear, Family::ddpm, Family::dlpm};
  PilotGrid pilot;
  MainConfig main;
  std::string output_dir = "runs";
  std::uint64_t base_seed = 0;
  std::size_t workers = 0;  // 0: hardware concurrency
  SelectionMap overrides;   // explicit selections that bypass the pilot

  /// Full-scale ("full", "pilot", "main") or desk-scale ("pilot-mini",
  /// "main-mini", "mini") presets on the four-dataset list, minus tabular sets.
  static BenchConfig preset(const std::string& name);
  static BenchConfig from_json(const nlohmann::json& j);
  static BenchConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Hash of everything that affects results; excludes output_dir and workers.
  std::uint64_t hash() const;

  /// Model list with DLPM expanded over the configured tail indices.
  std::vector<ModelSpec> models(std::size_t steps) const;
};

/// Optional fault injection; may throw to simulate a failed trial.
struct BenchHooks {
  std::function<void(const std::string& dataset, const ModelSpec& model, double lr, double sigma_max,
                     std::size_t trial)>
      before_trial;
  /// Replaces train + validation in the pilot when set.
  std::function<double(const Dataset& data, const ModelSpec& model, double lr, std::size_t trial)>
      pilot_objective;
};

struct PilotRecord {
  std::string dataset;
  std::string model;
  double lr = 0.0;
  double sigma_max = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double objective = 0.0;
  std::string error;  // empty on success
};

struct PilotOutcome {
  std::vector<PilotRecord> records;
  SelectionMap selected;
  std::vector<std::string> disqualified;  // "<dataset>/<model>@lr=..,sigma=.."
};

/// Train every grid point `trials` times, average the last-epoch validation
/// objective, keep the minimum. Ties go to the smaller learning rate, then the
/// smaller sigma_max. A non-finite or failed trial disqualifies its grid point.
PilotOutcome run_pilot(const std::vector<std::pair<DatasetConfig, Dataset>>& datasets,
                       const BenchConfig& cfg, const BenchHooks& hooks = {});

struct BenchResult {
  std::string dataset;
  std::string model;
  std::uint64_t config_hash = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string metric;
  std::optional<double> level;
  double value = 0.0;
  double wall_seconds = 0.0;
  std::string curve_ref;
};

struct TrialFailure {
  std::string dataset;
  std::string model;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct TrialCurve {
  std::string dataset;
  std::string model;
  std::size_t trial = 0;
  std::vector<double> loss;
};

struct MainOutcome {
  std::vector<BenchResult> results;
  std::vector<TrialFailure> failures;
  std::vector<TrialCurve> curves;
  std::vector<std::string> aborted;  // pairs where more than half the trials failed
};

/// Per trial: seed = base_seed + trial, train, draw |test| samples, score
/// MMD-RBF and TCE against the test split.
MainOutcome run_main(const std::vector<std::pair<DatasetConfig, Dataset>>& datasets,
                     const SelectionMap& selected, const BenchConfig& cfg, const BenchHooks& hooks = {});

/// Mean and sample standard deviation per (dataset, model, metric, level).
struct AggregateRow {
  std::string dataset;
  std::string model;
  std::string metric;
  std::optional<double> level;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  bool best = false;  // minimum mean in its (dataset, metric, level) column
};

std::vector<AggregateRow> aggregate(const std::vector<BenchResult>& results);

struct CurveSummary {
  std::string dataset;
  std::string model;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::vector<double>> trials;
};

/// Per-epoch mean and across-trial standard deviation; errors on ragged curves.
std::vector<CurveSummary> loss_curves(const std::vector<TrialCurve>& curves);

std::string format_number(double v);

void write_results_csv(const std::filesystem::path& path, const std::vector<BenchResult>& rows);
std::vector<BenchResult> read_results_csv(const std::filesystem::path& path,
                                          std::vector<std::string>* malformed = nullptr);

/// Everything for a configured run: pilot (unless disabled or fully
/// overridden), main benchmark, and all output files under cfg.output_dir.
/// Returns false when some pair aborted.
bool run_bench(const BenchConfig& cfg, const BenchHooks& hooks = {}, bool pilot_only = false);

}  // namespace htbench
