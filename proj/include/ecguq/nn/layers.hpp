#pragma once

#include <memory>
#include <vector>

#include "ecguq/dsp.hpp"
#include "ecguq/nn/layer.hpp"

namespace ecguq::nn {

// Affine map on the last axis; accepts (N, in) or (B, T, in).
class Linear : public Layer {
 public:
  Linear(std::int64_t in_dim, std::int64_t out_dim);

  const char* kind() const override { return "linear"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

  std::int64_t in_dim() const { return in_; }
  std::int64_t out_dim() const { return out_; }

  Tensor weight;  // (in, out)
  Tensor bias;    // (out)

 private:
  std::int64_t in_, out_;
};

class Conv1d : public Layer {
 public:
  Conv1d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride = 1,
         std::int64_t padding = 0);

  const char* kind() const override { return "conv1d"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

  std::int64_t out_len(std::int64_t in_len) const;

  Tensor weight;  // (out_ch, in_ch, kernel)
  Tensor bias;    // (out_ch)

 private:
  std::int64_t in_ch_, out_ch_, kernel_, stride_, padding_;
};

class BatchNorm1d : public Layer {
 public:
  explicit BatchNorm1d(std::int64_t channels, double eps = 1e-5, double momentum = 0.1);

  const char* kind() const override { return "batchnorm1d"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void visit_buffers(const ParamVisitor& v) override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

  Tensor gamma;  // (C)
  Tensor beta;   // (C)
  // Running statistics are inference state, not trained parameters; they are
  // serialized separately and only mutated when pass.training is set.
  mutable Tensor running_mean;  // (C)
  mutable Tensor running_var;   // (C)

 private:
  std::int64_t channels_;
  double eps_, momentum_;
};

class MaxPool1d : public Layer {
 public:
  explicit MaxPool1d(std::int64_t kernel, std::int64_t stride = 0);  // stride 0 -> kernel

  const char* kind() const override { return "maxpool1d"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;

 private:
  std::int64_t kernel_, stride_;
};

class AdaptiveAvgPool1d : public Layer {
 public:
  explicit AdaptiveAvgPool1d(std::int64_t out_len);

  const char* kind() const override { return "adaptiveavgpool1d"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;

 private:
  std::int64_t out_len_;
};

class ReLU : public Layer {
 public:
  const char* kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

// Row-wise softmax over the last axis, max-subtracted.
class Softmax : public Layer {
 public:
  const char* kind() const override { return "softmax"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double rate);

  const char* kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;

  double rate() const { return rate_; }

 private:
  double rate_;
};

// (B, L) -> (B, 1, L): raw signal as a single conv channel.
class AsChannels : public Layer {
 public:
  const char* kind() const override { return "as_channels"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

// (B, L) -> (B, ceil(L/p), p), zero-padding the tail. p = L yields one token
// holding the whole segment; p = 1 yields a length-L sequence of scalars.
class Patchify : public Layer {
 public:
  explicit Patchify(std::int64_t patch_len);

  const char* kind() const override { return "patchify"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;

 private:
  std::int64_t patch_len_;
};

class Flatten : public Layer {
 public:
  const char* kind() const override { return "flatten"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

// (B, T, H) -> (B, H), keeping the final time step.
class LastStep : public Layer {
 public:
  const char* kind() const override { return "last_step"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

// (B, T, D) -> (B, D) temporal mean.
class MeanOverTime : public Layer {
 public:
  const char* kind() const override { return "mean_over_time"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;
};

// Fixed (non-trainable) STFT front end: (B, 187) -> (B, frames, bins),
// standardized per record. Gradient stops here.
class SpectrogramLayer : public Layer {
 public:
  explicit SpectrogramLayer(StftConfig cfg, bool standardize = true);

  const char* kind() const override { return "spectrogram"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  nlohmann::json config() const override;

  const StftConfig& stft() const { return cfg_; }

 private:
  StftConfig cfg_;
  bool standardize_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<std::unique_ptr<Layer>> children);

  void add(std::unique_ptr<Layer> layer);

  const char* kind() const override { return "sequential"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void visit_buffers(const ParamVisitor& v) override;
  void visit_layers(const std::function<void(const Layer&)>& v) const override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

  std::size_t size() const { return children_.size(); }
  const Layer& child(std::size_t i) const { return *children_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> children_;
};

// Runs two branches on the same input and concatenates their (B, D) outputs.
class TwoBranch : public Layer {
 public:
  TwoBranch(std::unique_ptr<Layer> left, std::unique_ptr<Layer> right);

  const char* kind() const override { return "two_branch"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void visit_buffers(const ParamVisitor& v) override;
  void visit_layers(const std::function<void(const Layer&)>& v) const override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

 private:
  std::unique_ptr<Layer> left_, right_;
};

}  // namespace ecguq::nn
