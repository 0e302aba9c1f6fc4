#include "ecguq/nn/transformer.hpp"

#include <cmath>

namespace ecguq::nn {

namespace {

constexpr double kLnEps = 1e-5;

// y = x * W + b over rows; W is (in, out).
void affine_rows(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y, std::int64_t rows,
                 std::int64_t in, std::int64_t out) {
  parallel_for(rows, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      const double* xr = x.data() + r * in;
      double* yr = y.data() + r * out;
      std::copy(b.data(), b.data() + out, yr);
      for (std::int64_t k = 0; k < in; ++k) axpy(xr[k], w.data() + k * out, yr, out);
    }
  });
}

// Accumulates dW, db and writes gx for the affine above.
void affine_rows_backward(const Tensor& x, const Tensor& w, const Tensor& gy, Tensor& gx, Tensor& gw,
                          Tensor& gb, std::int64_t rows, std::int64_t in, std::int64_t out,
                          bool accumulate_gx) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in;
    const double* gyr = gy.data() + r * out;
    double* gxr = gx.data() + r * in;
    for (std::int64_t k = 0; k < in; ++k) {
      axpy(xr[k], gyr, gw.data() + k * out, out);
      const double v = dot(w.data() + k * out, gyr, out);
      if (accumulate_gx) {
        gxr[k] += v;
      } else {
        gxr[k] = v;
      }
    }
    axpy(1.0, gyr, gb.data(), out);
  }
}

// Row-wise layer norm; stores xhat and 1/std for the backward pass.
void layer_norm(const Tensor& x, const Tensor& g, const Tensor& b, Tensor& y, Tensor& xhat, Tensor& istd,
                std::int64_t rows, std::int64_t d) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mean = 0;
    for (std::int64_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0;
    for (std::int64_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    istd[r] = inv;
    double* hr = xhat.data() + r * d;
    double* yr = y.data() + r * d;
    for (std::int64_t i = 0; i < d; ++i) {
      hr[i] = (xr[i] - mean) * inv;
      yr[i] = g[i] * hr[i] + b[i];
    }
  }
}

void layer_norm_backward(const Tensor& gy, const Tensor& xhat, const Tensor& istd, const Tensor& g,
                         Tensor& gx, Tensor& gg, Tensor& gb, std::int64_t rows, std::int64_t d) {
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* gyr = gy.data() + r * d;
    const double* hr = xhat.data() + r * d;
    double* gxr = gx.data() + r * d;
    double sum_gg = 0, sum_ggh = 0;
    for (std::int64_t i = 0; i < d; ++i) {
      const double t = gyr[i] * g[i];
      sum_gg += t;
      sum_ggh += t * hr[i];
      gg[i] += gyr[i] * hr[i];
      gb[i] += gyr[i];
    }
    const double m1 = sum_gg / static_cast<double>(d);
    const double m2 = sum_ggh / static_cast<double>(d);
    for (std::int64_t i = 0; i < d; ++i) {
      gxr[i] = istd[r] * (gyr[i] * g[i] - m1 - hr[i] * m2);
    }
  }
}

// Dropout on a whole tensor; returns the (possibly empty) saved mask.
Tensor apply_dropout(Tensor& x, double rate, const Pass& pass) {
  if (rate == 0.0 || !pass.stochastic()) return Tensor();
  if (pass.rng == nullptr) throw std::invalid_argument("transformer: stochastic pass requires an rng stream");
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  Tensor mask(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double m = pass.rng->uniform() < keep ? scale : 0.0;
    mask[i] = m;
    x[i] *= m;
  }
  return mask;
}

void dropout_backward_inplace(Tensor& g, const Tensor& mask) {
  if (mask.empty()) return;
  for (std::int64_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
}

}  // namespace

TransformerEncoder::TransformerEncoder(std::int64_t model_dim, std::int64_t num_heads, std::int64_t num_layers,
                                       std::int64_t ff_dim, double dropout_rate, std::int64_t seq_len)
    : dim_(model_dim), heads_(num_heads), layers_(num_layers), ff_(ff_dim), seq_len_(seq_len),
      rate_(dropout_rate), pos_({seq_len, model_dim}) {
  if (model_dim < 1 || num_heads < 1 || num_layers < 1 || ff_dim < 1 || seq_len < 1) {
    throw std::invalid_argument("transformer: dims must be positive");
  }
  if (model_dim % num_heads != 0) {
    throw std::invalid_argument("transformer: model_dim must be divisible by num_heads");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("transformer: dropout rate must be in [0,1)");
  }
  for (std::int64_t l = 0; l < layers_; ++l) {
    blocks_.push_back(Block{Tensor({dim_, dim_}), Tensor({dim_}), Tensor({dim_, dim_}), Tensor({dim_}),
                            Tensor({dim_, dim_}), Tensor({dim_}), Tensor({dim_, dim_}), Tensor({dim_}),
                            Tensor({dim_}), Tensor({dim_}), Tensor({dim_, ff_}), Tensor({ff_}),
                            Tensor({ff_, dim_}), Tensor({dim_}), Tensor({dim_}), Tensor({dim_})});
  }
}

const Tensor& TransformerEncoder::attention_probs(const LayerCtx& ctx, std::int64_t block) {
  return ctx.saved[static_cast<std::size_t>(block * kSavedPerBlock + 4)];
}

Tensor TransformerEncoder::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  if (x.rank() != 3 || x.dim(1) != seq_len_ || x.dim(2) != dim_) {
    throw ShapeError("transformer: expected (B," + std::to_string(seq_len_) + "," + std::to_string(dim_) +
                     "), got " + x.shape_str());
  }
  const std::int64_t batch = x.dim(0), S = seq_len_, D = dim_;
  const std::int64_t rows = batch * S;
  const std::int64_t dk = D / heads_;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  ctx.saved.clear();
  ctx.saved.reserve(static_cast<std::size_t>(layers_ * kSavedPerBlock));

  // Learned positional offsets, shared across the batch.
  Tensor h(x.shape());
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t s = 0; s < S; ++s) {
      const double* xr = &x.at(b, s, 0);
      const double* pr = pos_.data() + s * D;
      double* hr = &h.at(b, s, 0);
      for (std::int64_t i = 0; i < D; ++i) hr[i] = xr[i] + pr[i];
    }
  }

  for (const Block& blk : blocks_) {
    Tensor x_in = h;

    Tensor q({batch, S, D}), k({batch, S, D}), v({batch, S, D});
    affine_rows(h, blk.wq, blk.bq, q, rows, D, D);
    affine_rows(h, blk.wk, blk.bk, k, rows, D, D);
    affine_rows(h, blk.wv, blk.bv, v, rows, D, D);

    Tensor probs({batch * heads_, S, S});
    Tensor hcat({batch, S, D});
    parallel_for(batch * heads_, [&](std::int64_t i0, std::int64_t i1) {
      for (std::int64_t i = i0; i < i1; ++i) {
        const std::int64_t b = i / heads_;
        const std::int64_t off = (i % heads_) * dk;
        for (std::int64_t r = 0; r < S; ++r) {
          double* pr = &probs.at(i, r, 0);
          double mx = -1e300;
          for (std::int64_t c = 0; c < S; ++c) {
            pr[c] = inv_sqrt_dk * dot(&q.at(b, r, off), &k.at(b, c, off), dk);
            mx = std::max(mx, pr[c]);
          }
          double sum = 0;
          for (std::int64_t c = 0; c < S; ++c) {
            pr[c] = std::exp(pr[c] - mx);
            sum += pr[c];
          }
          double* out = &hcat.at(b, r, off);
          std::fill(out, out + dk, 0.0);
          for (std::int64_t c = 0; c < S; ++c) {
            pr[c] /= sum;
            axpy(pr[c], &v.at(b, c, off), out, dk);
          }
        }
      }
    });

    Tensor attn({batch, S, D});
    affine_rows(hcat, blk.wo, blk.bo, attn, rows, D, D);
    Tensor mask_a = apply_dropout(attn, rate_, pass);

    // residual + LN1
    for (std::int64_t i = 0; i < attn.size(); ++i) attn[i] += h[i];
    Tensor h1(attn.shape()), xhat1(attn.shape()), istd1({rows});
    layer_norm(attn, blk.ln1_g, blk.ln1_b, h1, xhat1, istd1, rows, D);

    // feed-forward
    Tensor z1({batch, S, ff_});
    affine_rows(h1, blk.ff_w1, blk.ff_b1, z1, rows, D, ff_);
    for (std::int64_t i = 0; i < z1.size(); ++i) z1[i] = z1[i] > 0 ? z1[i] : 0.0;  // relu, kept for backward
    Tensor f2({batch, S, D});
    affine_rows(z1, blk.ff_w2, blk.ff_b2, f2, rows, ff_, D);
    Tensor mask_f = apply_dropout(f2, rate_, pass);

    // residual + LN2
    for (std::int64_t i = 0; i < f2.size(); ++i) f2[i] += h1[i];
    Tensor h2(f2.shape()), xhat2(f2.shape()), istd2({rows});
    layer_norm(f2, blk.ln2_g, blk.ln2_b, h2, xhat2, istd2, rows, D);

    ctx.saved.push_back(std::move(x_in));
    ctx.saved.push_back(std::move(q));
    ctx.saved.push_back(std::move(k));
    ctx.saved.push_back(std::move(v));
    ctx.saved.push_back(std::move(probs));
    ctx.saved.push_back(std::move(hcat));
    ctx.saved.push_back(std::move(mask_a));
    ctx.saved.push_back(std::move(xhat1));
    ctx.saved.push_back(std::move(istd1));
    ctx.saved.push_back(std::move(h1));
    ctx.saved.push_back(std::move(z1));
    ctx.saved.push_back(std::move(mask_f));
    ctx.saved.push_back(std::move(xhat2));
    ctx.saved.push_back(std::move(istd2));

    h = std::move(h2);
  }
  return h;
}

Tensor TransformerEncoder::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const std::int64_t batch = gy.dim(0), S = seq_len_, D = dim_;
  const std::int64_t rows = batch * S;
  const std::int64_t dk = D / heads_;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor g = gy;
  for (std::int64_t l = layers_ - 1; l >= 0; --l) {
    const Block& blk = blocks_[static_cast<std::size_t>(l)];
    const std::size_t sbase = static_cast<std::size_t>(l * kSavedPerBlock);
    const Tensor& x_in = ctx.saved[sbase + 0];
    const Tensor& q = ctx.saved[sbase + 1];
    const Tensor& k = ctx.saved[sbase + 2];
    const Tensor& v = ctx.saved[sbase + 3];
    const Tensor& probs = ctx.saved[sbase + 4];
    const Tensor& hcat = ctx.saved[sbase + 5];
    const Tensor& mask_a = ctx.saved[sbase + 6];
    const Tensor& xhat1 = ctx.saved[sbase + 7];
    const Tensor& istd1 = ctx.saved[sbase + 8];
    const Tensor& h1 = ctx.saved[sbase + 9];
    const Tensor& z1 = ctx.saved[sbase + 10];
    const Tensor& mask_f = ctx.saved[sbase + 11];
    const Tensor& xhat2 = ctx.saved[sbase + 12];
    const Tensor& istd2 = ctx.saved[sbase + 13];

    const std::size_t pbase = static_cast<std::size_t>(1 + l * kParamsPerBlock);
    Tensor& g_wq = pgrads[pbase + 0];
    Tensor& g_bq = pgrads[pbase + 1];
    Tensor& g_wk = pgrads[pbase + 2];
    Tensor& g_bk = pgrads[pbase + 3];
    Tensor& g_wv = pgrads[pbase + 4];
    Tensor& g_bv = pgrads[pbase + 5];
    Tensor& g_wo = pgrads[pbase + 6];
    Tensor& g_bo = pgrads[pbase + 7];
    Tensor& g_ln1g = pgrads[pbase + 8];
    Tensor& g_ln1b = pgrads[pbase + 9];
    Tensor& g_ffw1 = pgrads[pbase + 10];
    Tensor& g_ffb1 = pgrads[pbase + 11];
    Tensor& g_ffw2 = pgrads[pbase + 12];
    Tensor& g_ffb2 = pgrads[pbase + 13];
    Tensor& g_ln2g = pgrads[pbase + 14];
    Tensor& g_ln2b = pgrads[pbase + 15];

    // LN2
    Tensor gr2({batch, S, D});
    layer_norm_backward(g, xhat2, istd2, blk.ln2_g, gr2, g_ln2g, g_ln2b, rows, D);

    // residual split: gr2 reaches h1 both directly and through the feed-forward.
    Tensor gh1 = gr2;
    Tensor gf2 = std::move(gr2);
    dropout_backward_inplace(gf2, mask_f);

    Tensor gz1({batch, S, ff_});
    affine_rows_backward(z1, blk.ff_w2, gf2, gz1, g_ffw2, g_ffb2, rows, ff_, D, /*accumulate_gx=*/false);
    for (std::int64_t i = 0; i < gz1.size(); ++i) {
      if (z1[i] <= 0) gz1[i] = 0;
    }
    affine_rows_backward(h1, blk.ff_w1, gz1, gh1, g_ffw1, g_ffb1, rows, D, ff_, /*accumulate_gx=*/true);

    // LN1
    Tensor gr1({batch, S, D});
    layer_norm_backward(gh1, xhat1, istd1, blk.ln1_g, gr1, g_ln1g, g_ln1b, rows, D);

    Tensor gx_in = gr1;  // residual path to the block input
    Tensor gattn = std::move(gr1);
    dropout_backward_inplace(gattn, mask_a);

    Tensor ghcat({batch, S, D});
    affine_rows_backward(hcat, blk.wo, gattn, ghcat, g_wo, g_bo, rows, D, D, /*accumulate_gx=*/false);

    // attention
    Tensor gq({batch, S, D}), gk({batch, S, D}), gv({batch, S, D});
    parallel_for(batch * heads_, [&](std::int64_t i0, std::int64_t i1) {
      std::vector<double> dp(static_cast<std::size_t>(S));
      for (std::int64_t i = i0; i < i1; ++i) {
        const std::int64_t b = i / heads_;
        const std::int64_t off = (i % heads_) * dk;
        for (std::int64_t r = 0; r < S; ++r) {
          const double* go = &ghcat.at(b, r, off);
          const double* pr = &probs.at(i, r, 0);
          double inner = 0;
          for (std::int64_t c = 0; c < S; ++c) {
            dp[static_cast<std::size_t>(c)] = dot(go, &v.at(b, c, off), dk);
            inner += dp[static_cast<std::size_t>(c)] * pr[c];
            axpy(pr[c], go, &gv.at(b, c, off), dk);
          }
          double* gqr = &gq.at(b, r, off);
          for (std::int64_t c = 0; c < S; ++c) {
            const double ds = pr[c] * (dp[static_cast<std::size_t>(c)] - inner) * inv_sqrt_dk;
            axpy(ds, &k.at(b, c, off), gqr, dk);
            axpy(ds, &q.at(b, r, off), &gk.at(b, c, off), dk);
          }
        }
      }
    });

    affine_rows_backward(x_in, blk.wq, gq, gx_in, g_wq, g_bq, rows, D, D, /*accumulate_gx=*/true);
    affine_rows_backward(x_in, blk.wk, gk, gx_in, g_wk, g_bk, rows, D, D, /*accumulate_gx=*/true);
    affine_rows_backward(x_in, blk.wv, gv, gx_in, g_wv, g_bv, rows, D, D, /*accumulate_gx=*/true);

    g = std::move(gx_in);
  }

  // positional embedding gradient, then pass the remainder to the input
  Tensor& g_pos = pgrads[0];
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t s = 0; s < S; ++s) {
      axpy(1.0, &g.at(b, s, 0), g_pos.data() + s * D, D);
    }
  }
  return g;
}

void TransformerEncoder::visit_params(const ParamVisitor& vis) {
  vis(pos_);
  for (auto& blk : blocks_) {
    vis(blk.wq);
    vis(blk.bq);
    vis(blk.wk);
    vis(blk.bk);
    vis(blk.wv);
    vis(blk.bv);
    vis(blk.wo);
    vis(blk.bo);
    vis(blk.ln1_g);
    vis(blk.ln1_b);
    vis(blk.ff_w1);
    vis(blk.ff_b1);
    vis(blk.ff_w2);
    vis(blk.ff_b2);
    vis(blk.ln2_g);
    vis(blk.ln2_b);
  }
}

void TransformerEncoder::reset_parameters(RngStream& rng) {
  pos_.zero();
  for (auto& blk : blocks_) {
    fan_in_uniform(blk.wq, dim_, rng);
    fan_in_uniform(blk.bq, dim_, rng);
    fan_in_uniform(blk.wk, dim_, rng);
    fan_in_uniform(blk.bk, dim_, rng);
    fan_in_uniform(blk.wv, dim_, rng);
    fan_in_uniform(blk.bv, dim_, rng);
    fan_in_uniform(blk.wo, dim_, rng);
    fan_in_uniform(blk.bo, dim_, rng);
    blk.ln1_g.fill(1.0);
    blk.ln1_b.zero();
    fan_in_uniform(blk.ff_w1, dim_, rng);
    fan_in_uniform(blk.ff_b1, dim_, rng);
    fan_in_uniform(blk.ff_w2, ff_, rng);
    fan_in_uniform(blk.ff_b2, ff_, rng);
    blk.ln2_g.fill(1.0);
    blk.ln2_b.zero();
  }
}

nlohmann::json TransformerEncoder::config() const {
  return {{"model_dim", dim_}, {"num_heads", heads_},   {"num_layers", layers_},
          {"ff_dim", ff_},     {"dropout_rate", rate_}, {"seq_len", seq_len_}};
}

}  // namespace ecguq::nn
