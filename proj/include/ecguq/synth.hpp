#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecguq/data.hpp"

namespace ecguq {

// Deterministic ECG-like heartbeat generator used for demos and self-checks
// when the public corpora are not on disk. Beats are built from Gaussian
// bumps (QRS, T, the following beat's onset) with per-class morphology:
// premature beats, widened QRS, inverted T waves, paced double humps, and so
// on, plus baseline wander and sensor noise, min-max scaled to [0,1] like the
// public corpus. A small borderline fraction blends two class morphologies so
// no classifier can reach 100% and uncertainty has something to flag.
struct SynthConfig {
  std::uint64_t seed = 0;
  double noise_sigma = 0.035;
  double borderline_fraction = 0.05;
};

HeartbeatRecord synth_record(const DatasetMeta& meta, int label, std::uint64_t record_seed,
                             const SynthConfig& cfg);

// n records with the corpus' characteristic class mix (heavily imbalanced for
// the 5-class set, roughly 28/72 for the binary one), deterministically
// shuffled. Per-class counts hit the requested total exactly.
std::vector<HeartbeatRecord> synth_corpus(const DatasetMeta& meta, std::int64_t n, const SynthConfig& cfg);

// Writes <dataset>_train.csv and <dataset>_test.csv with exact row counts.
void write_synth_corpus_files(const std::string& dir, const DatasetMeta& meta, std::int64_t train_rows,
                              std::int64_t test_rows, const SynthConfig& cfg);

}  // namespace ecguq
