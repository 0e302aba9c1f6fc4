#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "ecguq/nn/network.hpp"

namespace ecguq::nn {

struct TrainConfig {
  enum class Optimizer { kAdam, kSgd };
  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 1e-3;
  // Adam moments; ignored for sgd.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 128;
  int epochs = 1;
  std::optional<std::vector<double>> class_weights;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Optimizer steps, exposed so the no-op contract of a zero learning rate is
// directly testable. Adam keeps first/second moment buffers per tensor.
struct AdamState {
  std::vector<Tensor> m, v;
  std::int64_t step = 0;
  void init(const std::vector<Tensor*>& params);
};
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);
void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr);

// Mean (optionally class-weighted) cross-entropy of softmax outputs against
// integer targets. When grad is non-null it receives dLoss/dprobs. Targets
// outside [0, C) raise std::invalid_argument.
double cross_entropy(const Tensor& probs, std::span<const int> targets,
                     const std::optional<std::vector<double>>& class_weights, Tensor* grad);

// Mini-batch training with seeded shuffling and per-batch dropout streams;
// bitwise reproducible for a fixed config regardless of thread count.
// Throws TrainError with epoch/batch diagnostics if the loss diverges.
TrainResult train(Network& net, const Tensor& inputs, const std::vector<int>& labels, int num_classes,
                  const TrainConfig& cfg);

// Deterministic forward in eval mode, batched; returns argmax classes.
std::vector<int> predict_classes(const Network& net, const Tensor& inputs, int eval_batch = 256);
double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels);

}  // namespace ecguq::nn
