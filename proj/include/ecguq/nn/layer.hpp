#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "ecguq/common.hpp"
#include "ecguq/tensor.hpp"

namespace ecguq::nn {

// Dropout behavior of one forward pass. eval-stochastic keeps dropout masks
// live at inference, which is what makes MC-dropout sampling possible;
// eval-deterministic is the inverted-dropout identity (no rescaling needed).
enum class DropoutMode { kTrainStochastic, kEvalDeterministic, kEvalStochastic };

struct Pass {
  DropoutMode dropout = DropoutMode::kEvalDeterministic;
  bool training = false;      // batch-norm batch statistics + running-stat update
  RngStream* rng = nullptr;   // required when a stochastic mode meets a dropout rate > 0

  bool stochastic() const { return dropout != DropoutMode::kEvalDeterministic; }
};

// Per-call activation stash. Layers write what their backward needs here so
// the layer objects themselves stay shareable across concurrent passes.
struct LayerCtx {
  std::vector<Tensor> saved;
  std::vector<LayerCtx> children;
};

using ParamVisitor = std::function<void(Tensor&)>;

class Layer {
 public:
  virtual ~Layer() = default;

  virtual const char* kind() const = 0;

  virtual Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const = 0;

  // Gradient of the loss w.r.t. this layer's input. Parameter gradients are
  // accumulated (+=) into pgrads, which holds exactly this layer's tensors in
  // visit_params order.
  virtual Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const = 0;

  virtual void visit_params(const ParamVisitor& v) { (void)v; }
  // Non-trained state that must survive checkpointing (batch-norm running stats).
  virtual void visit_buffers(const ParamVisitor& v) { (void)v; }
  virtual void visit_layers(const std::function<void(const Layer&)>& v) const { v(*this); }
  virtual void reset_parameters(RngStream& rng) { (void)rng; }

  // Structure (hyperparameters and children), without parameter values.
  virtual nlohmann::json config() const = 0;

  int num_param_tensors() const;
};

nlohmann::json layer_to_json(const Layer& layer);
std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j);

// U(-bound, bound) with bound = 1/sqrt(fan_in); the fan-in-scaled uniform
// init used for every weight matrix in this project.
void fan_in_uniform(Tensor& t, std::int64_t fan_in, RngStream& rng);

}  // namespace ecguq::nn
