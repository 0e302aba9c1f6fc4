#include "ecguq/nn/lstm.hpp"

#include <cmath>

namespace ecguq::nn {

namespace {
inline double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}
}  // namespace

Lstm::Lstm(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t num_layers)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), num_layers_(num_layers) {
  if (input_dim < 1 || hidden_dim < 1 || num_layers < 1) {
    throw std::invalid_argument("lstm: dims and layer count must be positive");
  }
  for (std::int64_t l = 0; l < num_layers; ++l) {
    cells_.push_back(Cell{Tensor({in_dim(l), 4 * hidden_dim}), Tensor({hidden_dim, 4 * hidden_dim}),
                          Tensor({4 * hidden_dim}), Tensor({4 * hidden_dim})});
  }
}

Tensor Lstm::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  if (x.rank() != 3 || x.dim(2) != input_dim_) {
    throw ShapeError("lstm: expected (B,T," + std::to_string(input_dim_) + "), got " + x.shape_str());
  }
  const std::int64_t batch = x.dim(0), steps = x.dim(1);
  const std::int64_t H = hidden_dim_, G = 4 * H;

  // Saved per layer: [input sequence, hidden incl. h0, cell incl. c0, gates].
  ctx.saved.clear();
  Tensor cur = x;
  for (std::int64_t l = 0; l < num_layers_; ++l) {
    const Cell& cell = cells_[static_cast<std::size_t>(l)];
    const std::int64_t d = in_dim(l);
    Tensor hs({batch, steps + 1, H});
    Tensor cs({batch, steps + 1, H});
    Tensor gates({batch, steps, G});
    Tensor out({batch, steps, H});

    parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
      std::vector<double> a(static_cast<std::size_t>(G));
      for (std::int64_t b = b0; b < b1; ++b) {
        for (std::int64_t t = 0; t < steps; ++t) {
          for (std::int64_t j = 0; j < G; ++j) a[static_cast<std::size_t>(j)] = cell.b_ih[j] + cell.b_hh[j];
          const double* xt = &cur.at(b, t, 0);
          for (std::int64_t k = 0; k < d; ++k) axpy(xt[k], cell.w_ih.data() + k * G, a.data(), G);
          const double* hprev = &hs.at(b, t, 0);
          for (std::int64_t k = 0; k < H; ++k) axpy(hprev[k], cell.w_hh.data() + k * G, a.data(), G);

          double* g = &gates.at(b, t, 0);
          const double* cprev = &cs.at(b, t, 0);
          double* cnew = &cs.at(b, t + 1, 0);
          double* hnew = &hs.at(b, t + 1, 0);
          for (std::int64_t j = 0; j < H; ++j) {
            const double gi = sigmoid(a[static_cast<std::size_t>(j)]);
            const double gf = sigmoid(a[static_cast<std::size_t>(H + j)]);
            const double gg = std::tanh(a[static_cast<std::size_t>(2 * H + j)]);
            const double go = sigmoid(a[static_cast<std::size_t>(3 * H + j)]);
            g[j] = gi;
            g[H + j] = gf;
            g[2 * H + j] = gg;
            g[3 * H + j] = go;
            cnew[j] = gf * cprev[j] + gi * gg;
            hnew[j] = go * std::tanh(cnew[j]);
          }
          std::copy(hnew, hnew + H, &out.at(b, t, 0));
        }
      }
    });

    ctx.saved.push_back(cur);
    ctx.saved.push_back(std::move(hs));
    ctx.saved.push_back(std::move(cs));
    ctx.saved.push_back(std::move(gates));
    cur = std::move(out);
  }
  return cur;
}

Tensor Lstm::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const std::int64_t batch = gy.dim(0), steps = gy.dim(1);
  const std::int64_t H = hidden_dim_, G = 4 * H;

  Tensor grad_out = gy;
  for (std::int64_t l = num_layers_ - 1; l >= 0; --l) {
    const Cell& cell = cells_[static_cast<std::size_t>(l)];
    const std::int64_t d = in_dim(l);
    const Tensor& xin = ctx.saved[static_cast<std::size_t>(4 * l)];
    const Tensor& hs = ctx.saved[static_cast<std::size_t>(4 * l + 1)];
    const Tensor& cs = ctx.saved[static_cast<std::size_t>(4 * l + 2)];
    const Tensor& gates = ctx.saved[static_cast<std::size_t>(4 * l + 3)];

    Tensor& gw_ih = pgrads[static_cast<std::size_t>(4 * l)];
    Tensor& gw_hh = pgrads[static_cast<std::size_t>(4 * l + 1)];
    Tensor& gb_ih = pgrads[static_cast<std::size_t>(4 * l + 2)];
    Tensor& gb_hh = pgrads[static_cast<std::size_t>(4 * l + 3)];

    Tensor gx({batch, steps, d});
    std::vector<double> dh(static_cast<std::size_t>(H)), dc(static_cast<std::size_t>(H)),
        da(static_cast<std::size_t>(G));

    for (std::int64_t b = 0; b < batch; ++b) {
      std::fill(dh.begin(), dh.end(), 0.0);
      std::fill(dc.begin(), dc.end(), 0.0);
      for (std::int64_t t = steps - 1; t >= 0; --t) {
        const double* g = &gates.at(b, t, 0);
        const double* cprev = &cs.at(b, t, 0);
        const double* cnew = &cs.at(b, t + 1, 0);
        const double* gyr = &grad_out.at(b, t, 0);

        for (std::int64_t j = 0; j < H; ++j) {
          const double gi = g[j], gf = g[H + j], gg = g[2 * H + j], go = g[3 * H + j];
          const double tc = std::tanh(cnew[j]);
          const double dhj = gyr[j] + dh[static_cast<std::size_t>(j)];
          const double dcj = dc[static_cast<std::size_t>(j)] + dhj * go * (1.0 - tc * tc);
          da[static_cast<std::size_t>(j)] = dcj * gg * gi * (1.0 - gi);
          da[static_cast<std::size_t>(H + j)] = dcj * cprev[j] * gf * (1.0 - gf);
          da[static_cast<std::size_t>(2 * H + j)] = dcj * gi * (1.0 - gg * gg);
          da[static_cast<std::size_t>(3 * H + j)] = dhj * tc * go * (1.0 - go);
          dc[static_cast<std::size_t>(j)] = dcj * gf;
        }

        const double* xt = &xin.at(b, t, 0);
        double* gxt = &gx.at(b, t, 0);
        for (std::int64_t k = 0; k < d; ++k) {
          axpy(xt[k], da.data(), gw_ih.data() + k * G, G);
          gxt[k] = dot(cell.w_ih.data() + k * G, da.data(), G);
        }
        const double* hprev = &hs.at(b, t, 0);
        for (std::int64_t k = 0; k < H; ++k) {
          axpy(hprev[k], da.data(), gw_hh.data() + k * G, G);
          dh[static_cast<std::size_t>(k)] = dot(cell.w_hh.data() + k * G, da.data(), G);
        }
        axpy(1.0, da.data(), gb_ih.data(), G);
        axpy(1.0, da.data(), gb_hh.data(), G);
      }
    }
    grad_out = std::move(gx);
  }
  return grad_out;
}

void Lstm::visit_params(const ParamVisitor& v) {
  for (auto& cell : cells_) {
    v(cell.w_ih);
    v(cell.w_hh);
    v(cell.b_ih);
    v(cell.b_hh);
  }
}

void Lstm::reset_parameters(RngStream& rng) {
  // All weights U(-1/sqrt(H), 1/sqrt(H)), the usual recurrent-net convention.
  for (auto& cell : cells_) {
    fan_in_uniform(cell.w_ih, hidden_dim_, rng);
    fan_in_uniform(cell.w_hh, hidden_dim_, rng);
    fan_in_uniform(cell.b_ih, hidden_dim_, rng);
    fan_in_uniform(cell.b_hh, hidden_dim_, rng);
  }
}

nlohmann::json Lstm::config() const {
  return {{"input_dim", input_dim_}, {"hidden_dim", hidden_dim_}, {"num_layers", num_layers_}};
}

}  // namespace ecguq::nn
