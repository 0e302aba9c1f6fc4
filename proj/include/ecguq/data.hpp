#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecguq/common.hpp"
#include "ecguq/tensor.hpp"

namespace ecguq {

// One pre-segmented heartbeat: 187 amplitude samples plus its class label.
struct HeartbeatRecord {
  std::vector<double> samples;  // exactly kSegmentLength entries, all finite
  int label = 0;
};

struct DatasetMeta {
  std::string name;
  int num_classes = 0;
  double sampling_rate_hz = kSamplingRateHz;
  std::vector<std::string> class_names;

  static DatasetMeta mitbih();  // 5 classes: N, S, V, F, Q
  static DatasetMeta ptb();     // 2 classes: Normal, Abnormal
  static DatasetMeta by_name(const std::string& name);
};

struct SplitSpec {
  enum class Mode { kPregivenFiles, kStratifiedRandom };
  Mode mode = Mode::kStratifiedRandom;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<HeartbeatRecord> train;
  std::vector<HeartbeatRecord> test;
};

// Headerless CSV, one record per line: 187 floats then the label as the 188th
// field (parsed by round-to-nearest). Throws LoadError naming the offending
// 1-based row on malformed field counts, non-numeric fields, or label >= C.
std::vector<HeartbeatRecord> load_csv(const std::string& path, const DatasetMeta& meta);

// Round-trip export in the same format; sample values are written with
// shortest round-trip precision so reload is bit-identical.
void save_csv(const std::string& path, const std::vector<HeartbeatRecord>& records);

// Seeded stratified split; preserves per-class proportions within one record.
// Throws SplitError if any class has fewer than 2 records.
SplitResult split(const std::vector<HeartbeatRecord>& records, const SplitSpec& spec);

// Pregiven-files mode: the two file contents pass through unchanged.
SplitResult split_pregiven(std::vector<HeartbeatRecord> train, std::vector<HeartbeatRecord> test);

// Index batches for one epoch. Every index appears exactly once; the last
// batch may be short. With a seed, order is a seeded permutation.
std::vector<std::vector<std::int32_t>> make_batches(std::int64_t n, std::int64_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed);

// Optional preprocessing for raw (non-normalized) inputs.
void normalize_minmax(std::vector<HeartbeatRecord>& records);

// Inverse-frequency class weights, mean-normalized to 1.
std::vector<double> inverse_frequency_weights(const std::vector<HeartbeatRecord>& records, int num_classes);

// (N, 187) design matrix + label vector for the training/eval code.
Tensor to_matrix(const std::vector<HeartbeatRecord>& records);
std::vector<int> to_labels(const std::vector<HeartbeatRecord>& records);

std::vector<std::int64_t> class_histogram(const std::vector<HeartbeatRecord>& records, int num_classes);

}  // namespace ecguq
