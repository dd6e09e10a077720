#pragma once

// Experiment pipelines: repeated split/train/evaluate runs, sweeps,
// ablations and the latent-distance report.

#include "arw/adversarial.hpp"
#include "arw/config.hpp"
#include "arw/data.hpp"
#include "arw/metrics.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace arw {

enum class Method { Baseline, Reweighing, Undersampling, Oversampling, Adversarial };

const char* method_name(Method m);
Method parse_method(const std::string& s);

struct DatasetSpec {
  std::string kind = "csv";  // csv | synthetic | cache
  std::string path;
  DatasetSchema schema;
  SyntheticParams synthetic;
  double test_fraction = 0.2;
  double label_noise = 0.0;  // applied to the training split
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  Method method = Method::Adversarial;
  TrainConfig train;
  std::string out_dir;  // empty: no files written
  int repetitions = 5;
  std::uint64_t base_seed = 0;
  std::vector<std::string> metrics{"accuracy", "disparate_impact", "disparate_fpr", "disparate_fnr"};
  std::string reference_level;  // multi-group runs
  std::string pair_first, pair_second;
  ConfigMap source;  // effective key/value form, for hashing and the config copy

  void validate() const;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  EvalReport report;
  std::string round_log_path;
  std::string weights_path;
  double wall_clock_seconds = 0.0;
  std::vector<double> loss_history;
};

struct AggregateRow {
  std::string label;
  int runs = 0;
  MetricSummary accuracy, disparate_impact, disparate_fpr, disparate_fnr, abs_disparate_impact;
};

AggregateRow aggregate(const std::string& label, const std::vector<RunRecord>& runs);
std::string table_csv(const std::vector<AggregateRow>& rows);

/// Builds a config from flattened INI keys. Relative dataset paths resolve
/// against base_dir. Unknown keys are rejected.
ExperimentConfig experiment_from_config(const ConfigMap& m, const std::string& base_dir);

/// Loads the dataset described by the spec.
Dataset load_dataset(const DatasetSpec& spec);

/// Training configuration the method actually uses (weight mode, resampled
/// batch sizes) for a training split.
TrainConfig method_train_config(const ExperimentConfig& cfg, const Dataset& train_split, const Dataset& used);

/// Single repetition on an explicit train/test pair.
RunRecord run_once(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test, std::uint64_t seed,
                   const std::string& run_dir, TrainState* state_out = nullptr);

/// All repetitions, seeds base_seed + k. Writes per-run artifacts and
/// summary.csv when out_dir is set.
std::vector<RunRecord> run(const ExperimentConfig& cfg);

struct SweepRow {
  double value = 0.0;
  std::string method;
  AggregateRow row;
  std::vector<RunRecord> runs;
};

std::vector<SweepRow> sweep_T(const ExperimentConfig& cfg, const std::vector<double>& values);
std::vector<SweepRow> sweep_noise(const ExperimentConfig& cfg, const std::vector<double>& ratios,
                                  const std::vector<Method>& methods);
std::string sweep_long_csv(const std::string& parameter, const std::vector<SweepRow>& rows);

struct AblationRow {
  std::string arm;
  AggregateRow row;
  double final_w1 = 0.0;  // mean over repetitions of the exact subsampled W1 on training latents
  std::vector<RunRecord> runs;
};

/// axis: "distance" or "reweight_target".
std::vector<AblationRow> ablate(const ExperimentConfig& cfg, const std::string& axis);

struct DistanceSide {
  double w1_exact = 0.0;
  double w1_sd = 0.0;
  double critic_estimate = 0.0;
};

struct DistanceReport {
  DistanceSide before, after;
  std::size_t subsample_size = 0;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::string to_json() const;
  std::string json_lines() const;
};

/// Before: critic trained with the weights frozen uniform (T = 0). After:
/// the configured adversarial run. Both on the training split of seed base_seed.
DistanceReport report_distances(const ExperimentConfig& cfg);

struct MultiGroupRow {
  std::uint64_t seed = 0;
  double baseline_accuracy = 0.0, baseline_pair_di = 0.0;
  double method_accuracy = 0.0, method_pair_di = 0.0;
};

std::vector<MultiGroupRow> run_multigroup(const ExperimentConfig& cfg);

}  // namespace arw
