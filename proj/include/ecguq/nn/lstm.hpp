#pragma once

#include <vector>

#include "ecguq/nn/layer.hpp"

namespace ecguq::nn {

// Stacked LSTM. Input (B, T, input_dim), output the top layer's full hidden
// sequence (B, T, hidden_dim). Gate order along the 4H axis is i, f, g, o.
class Lstm : public Layer {
 public:
  Lstm(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t num_layers);

  const char* kind() const override { return "lstm"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

 private:
  struct Cell {
    Tensor w_ih;  // (in, 4H)
    Tensor w_hh;  // (H, 4H)
    Tensor b_ih;  // (4H)
    Tensor b_hh;  // (4H)
  };

  std::int64_t in_dim(std::int64_t layer) const { return layer == 0 ? input_dim_ : hidden_dim_; }

  std::int64_t input_dim_, hidden_dim_, num_layers_;
  std::vector<Cell> cells_;
};

}  // namespace ecguq::nn
