#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ecguq/data.hpp"
#include "ecguq/metrics.hpp"
#include "ecguq/models.hpp"
#include "ecguq/synth.hpp"
#include "ecguq/table4.hpp"
#include "ecguq/uq.hpp"

namespace ecguq {

// Everything one run needs; JSON-loadable, CLI flags override file values.
struct RunConfig {
  std::string dataset = "ptb";  // mitbih | ptb
  // Either both pregiven files, or one combined file that gets split.
  std::string train_csv;
  std::string test_csv;
  std::string data_csv;
  SplitSpec split;

  bool normalize = false;             // min-max per record, for raw inputs
  bool class_weighted_loss = false;   // inverse-frequency weights
  double subsample_fraction = 1.0;    // seeded stratified subsample (desk-scale runs)
  std::uint64_t subsample_seed = 0;

  ArchitectureSpec arch;
  nn::TrainConfig train;
  UqConfig uq;
  ThresholdPolicy threshold;

  std::string out_dir = "out";
  int num_repeats = 1;  // independently seeded trainings for mean +/- std reporting
  int threads = 0;      // 0 = hardware concurrency

  DatasetMeta meta() const { return DatasetMeta::by_name(dataset); }
  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct LoadedData {
  DatasetMeta meta;
  std::vector<HeartbeatRecord> train;
  std::vector<HeartbeatRecord> test;
};

// Applies the pregiven/split choice, optional normalization, and optional
// stratified subsampling.
LoadedData load_run_data(const RunConfig& cfg);

std::uint64_t config_hash(const RunConfig& cfg);

// Train the member models (N from the uq method; 1 for mcd), write
// member_<k>.ckpt.json, loss_curves.csv, and manifest.json under out_dir.
// Returns checkpoint paths.
std::vector<std::string> cmd_train(const RunConfig& cfg, std::ostream& log);

// Deterministic test-set evaluation of each checkpoint; evaluation.json gets
// per-run metrics plus mean and sample std across runs.
int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log);

// Full uncertainty pipeline: batch UQ, thresholding, uncertainty metrics,
// per-class UAcc, density export, prediction dump.
int cmd_uq(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log);

// Spectrogram CSVs for the first `count` test records.
int cmd_spectrogram_export(const RunConfig& cfg, int count, std::ostream& log);

// Recompute the published uncertainty table from its counts; one line per
// row. Empty path = the embedded 24 rows. Returns the number of failures.
int cmd_table4_oracle(const std::string& csv_path, std::ostream& out);

int cmd_synth(const std::string& dataset, const std::string& out_dir, std::int64_t train_rows,
              std::int64_t test_rows, std::uint64_t seed, std::ostream& log);

}  // namespace ecguq
