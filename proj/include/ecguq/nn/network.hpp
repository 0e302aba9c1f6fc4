#pragma once

#include <memory>
#include <vector>

#include "ecguq/nn/layer.hpp"

namespace ecguq::nn {

// Owns a layer graph and exposes the flat parameter view the optimizer,
// gradient checks, and checkpointing work against.
class Network {
 public:
  Network() = default;
  explicit Network(std::unique_ptr<Layer> root) : root_(std::move(root)) {}
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  const Layer& root() const { return *root_; }
  Layer& root() { return *root_; }
  bool valid() const { return root_ != nullptr; }

  Tensor forward(const Tensor& x, const Pass& pass) const;
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const;

  // Gradients accumulate into pgrads (shaped like params(), zeroed by caller
  // or freshly built via make_grad_buffers).
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::vector<Tensor>& pgrads) const;

  std::vector<Tensor*> params();
  std::vector<Tensor> make_grad_buffers();
  std::int64_t param_count();

  void reset_parameters(std::uint64_t seed);
  bool has_stochastic_dropout() const;

 private:
  std::unique_ptr<Layer> root_;
};

nlohmann::json network_to_json(Network& net);
Network network_from_json(const nlohmann::json& j);

}  // namespace ecguq::nn
