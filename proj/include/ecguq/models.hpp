#pragma once

#include <optional>
#include <string>

#include "ecguq/dsp.hpp"
#include "ecguq/nn/network.hpp"
#include "ecguq/nn/train.hpp"

namespace ecguq {

struct ArchitectureSpec {
  enum class Kind { kLstm, kCnn1d, kTransformer, kUctecg };
  Kind kind = Kind::kCnn1d;
  int num_classes = 2;
  double dropout_rate = 0.2;
  // Transformer front end: absent = one token holding the whole segment.
  std::optional<int> transformer_patch_len;
  // Spectrogram branch configuration (uctecg only).
  StftConfig stft;

  const char* kind_name() const;
  static Kind kind_from_name(const std::string& name);
  nlohmann::json to_json() const;
  static ArchitectureSpec from_json(const nlohmann::json& j);
};

// A built network plus its blueprint and training provenance.
struct Model {
  nn::Network net;
  ArchitectureSpec arch;
  std::optional<nn::TrainConfig> train_config;
  std::optional<std::uint64_t> train_seed;

  int num_classes() const { return arch.num_classes; }
};

Model build_model(const ArchitectureSpec& spec, std::uint64_t init_seed);

Model build_lstm(int num_classes, double dropout_rate = 0.2, std::uint64_t init_seed = 0);
Model build_cnn1d(int num_classes, double dropout_rate = 0.2, std::uint64_t init_seed = 0);
Model build_transformer(int num_classes, std::optional<int> patch_len = std::nullopt,
                        double dropout_rate = 0.2, std::uint64_t init_seed = 0);
Model build_uctecg(int num_classes, const StftConfig& stft = StftConfig{}, double dropout_rate = 0.2,
                   std::uint64_t init_seed = 0);

// JSON checkpoint: architecture spec, layer stack, parameters (exact float64
// round-trip), batch-norm buffers, and training provenance.
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ecguq
