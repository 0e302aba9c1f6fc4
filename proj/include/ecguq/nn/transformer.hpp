#pragma once

#include <vector>

#include "ecguq/nn/layer.hpp"

namespace ecguq::nn {

// Post-layer-norm transformer encoder over a fixed-length token sequence.
// Input (B, S, D). Learned additive positional embeddings (zero-initialized),
// multi-head self-attention, ReLU feed-forward of width ff_dim, dropout on
// the attention and feed-forward outputs before each residual add.
class TransformerEncoder : public Layer {
 public:
  TransformerEncoder(std::int64_t model_dim, std::int64_t num_heads, std::int64_t num_layers,
                     std::int64_t ff_dim, double dropout_rate, std::int64_t seq_len);

  const char* kind() const override { return "transformer_encoder"; }
  Tensor forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const override;
  Tensor backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const override;
  void visit_params(const ParamVisitor& v) override;
  void reset_parameters(RngStream& rng) override;
  nlohmann::json config() const override;

  std::int64_t seq_len() const { return seq_len_; }
  double dropout_rate() const { return rate_; }

  // Post-softmax attention probabilities of one block, shape (B*heads, S, S);
  // exposed for inspection of a captured forward context.
  static const Tensor& attention_probs(const LayerCtx& ctx, std::int64_t block);

 private:
  struct Block {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // attention projections, (D,D)/(D)
    Tensor ln1_g, ln1_b;                    // (D)
    Tensor ff_w1, ff_b1;                    // (D,FF)/(FF)
    Tensor ff_w2, ff_b2;                    // (FF,D)/(D)
    Tensor ln2_g, ln2_b;                    // (D)
  };
  static constexpr int kSavedPerBlock = 14;
  static constexpr int kParamsPerBlock = 16;

  std::int64_t dim_, heads_, layers_, ff_, seq_len_;
  double rate_;
  Tensor pos_;  // (S, D)
  std::vector<Block> blocks_;
};

}  // namespace ecguq::nn
