#include "ecguq/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace ecguq::nn {

namespace {

// Rows = every axis except the last, collapsed.
std::int64_t leading_rows(const Tensor& x) {
  std::int64_t n = 1;
  for (int i = 0; i + 1 < x.rank(); ++i) n *= x.dim(i);
  return n;
}

Tensor scalar_tensor(double v) {
  return Tensor({1}, {v});
}

Tensor shape_tensor(const std::vector<std::int64_t>& shape) {
  std::vector<double> v(shape.begin(), shape.end());
  const auto n = static_cast<std::int64_t>(v.size());
  return Tensor({n}, std::move(v));
}

std::vector<std::int64_t> shape_from_tensor(const Tensor& t) {
  std::vector<std::int64_t> shape(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) shape[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(t[i]);
  return shape;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

}  // namespace

// ------------------------------------------------------------------ Linear

Linear::Linear(std::int64_t in_dim, std::int64_t out_dim)
    : weight({in_dim, out_dim}), bias({out_dim}), in_(in_dim), out_(out_dim) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("linear: dims must be positive");
}

Tensor Linear::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() >= 2 && x.dim(x.rank() - 1) == in_,
          "linear: expected last dim " + std::to_string(in_) + ", got " + x.shape_str());
  const std::int64_t rows = leading_rows(x);
  auto out_shape = x.shape();
  out_shape.back() = out_;
  Tensor y(out_shape);

  const double* w = weight.data();
  parallel_for(rows, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      const double* xr = x.data() + r * in_;
      double* yr = y.data() + r * out_;
      std::copy(bias.data(), bias.data() + out_, yr);
      for (std::int64_t k = 0; k < in_; ++k) {
        axpy(xr[k], w + k * out_, yr, out_);
      }
    }
  });
  ctx.saved = {x};
  return y;
}

Tensor Linear::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const Tensor& x = ctx.saved[0];
  const std::int64_t rows = leading_rows(x);
  Tensor gx(x.shape());
  Tensor& gw = pgrads[0];
  Tensor& gb = pgrads[1];

  const double* w = weight.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * in_;
    const double* gyr = gy.data() + r * out_;
    double* gxr = gx.data() + r * in_;
    for (std::int64_t k = 0; k < in_; ++k) {
      axpy(xr[k], gyr, gw.data() + k * out_, out_);
      gxr[k] = dot(w + k * out_, gyr, out_);
    }
    axpy(1.0, gyr, gb.data(), out_);
  }
  return gx;
}

void Linear::visit_params(const ParamVisitor& v) {
  v(weight);
  v(bias);
}

void Linear::reset_parameters(RngStream& rng) {
  fan_in_uniform(weight, in_, rng);
  fan_in_uniform(bias, in_, rng);
}

nlohmann::json Linear::config() const {
  return {{"in_dim", in_}, {"out_dim", out_}};
}

// ------------------------------------------------------------------ Conv1d

Conv1d::Conv1d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
               std::int64_t padding)
    : weight({out_ch, in_ch, kernel}),
      bias({out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || padding < 0) {
    throw std::invalid_argument("conv1d: invalid configuration");
  }
}

std::int64_t Conv1d::out_len(std::int64_t in_len) const {
  return (in_len + 2 * padding_ - kernel_) / stride_ + 1;
}

Tensor Conv1d::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 3 && x.dim(1) == in_ch_,
          "conv1d: expected (B," + std::to_string(in_ch_) + ",L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), len = x.dim(2);
  const std::int64_t lo = out_len(len);
  require(lo >= 1, "conv1d: input length " + std::to_string(len) + " too short");

  Tensor y({batch, out_ch_, lo});
  parallel_for(batch * out_ch_, [&](std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      const std::int64_t b = i / out_ch_, oc = i % out_ch_;
      double* yr = &y.at(b, oc, 0);
      std::fill(yr, yr + lo, bias[oc]);
      for (std::int64_t ic = 0; ic < in_ch_; ++ic) {
        const double* xr = &x.at(b, ic, 0);
        const double* wr = &weight.at(oc, ic, 0);
        for (std::int64_t k = 0; k < kernel_; ++k) {
          const double wk = wr[k];
          if (stride_ == 1) {
            // valid t range where t + k - padding lands inside the signal
            const std::int64_t t0 = std::max<std::int64_t>(0, padding_ - k);
            const std::int64_t t1 = std::min<std::int64_t>(lo, len + padding_ - k);
            const double* src = xr + (t0 + k - padding_);
            axpy(wk, src, yr + t0, t1 - t0);
          } else {
            for (std::int64_t t = 0; t < lo; ++t) {
              const std::int64_t xi = t * stride_ + k - padding_;
              if (xi >= 0 && xi < len) yr[t] += wk * xr[xi];
            }
          }
        }
      }
    }
  });
  ctx.saved = {x};
  return y;
}

Tensor Conv1d::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const Tensor& x = ctx.saved[0];
  const std::int64_t batch = x.dim(0), len = x.dim(2);
  const std::int64_t lo = gy.dim(2);
  Tensor gx(x.shape());
  Tensor& gw = pgrads[0];
  Tensor& gb = pgrads[1];

  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t oc = 0; oc < out_ch_; ++oc) {
      const double* gyr = &gy.at(b, oc, 0);
      double s = 0;
      for (std::int64_t t = 0; t < lo; ++t) s += gyr[t];
      gb[oc] += s;
      for (std::int64_t ic = 0; ic < in_ch_; ++ic) {
        const double* xr = &x.at(b, ic, 0);
        double* gxr = &gx.at(b, ic, 0);
        const double* wr = &weight.at(oc, ic, 0);
        double* gwr = &gw.at(oc, ic, 0);
        for (std::int64_t k = 0; k < kernel_; ++k) {
          if (stride_ == 1) {
            const std::int64_t t0 = std::max<std::int64_t>(0, padding_ - k);
            const std::int64_t t1 = std::min<std::int64_t>(lo, len + padding_ - k);
            const double* src = xr + (t0 + k - padding_);
            gwr[k] += dot(src, gyr + t0, t1 - t0);
            axpy(wr[k], gyr + t0, gxr + (t0 + k - padding_), t1 - t0);
          } else {
            for (std::int64_t t = 0; t < lo; ++t) {
              const std::int64_t xi = t * stride_ + k - padding_;
              if (xi >= 0 && xi < len) {
                gwr[k] += xr[xi] * gyr[t];
                gxr[xi] += wr[k] * gyr[t];
              }
            }
          }
        }
      }
    }
  }
  return gx;
}

void Conv1d::visit_params(const ParamVisitor& v) {
  v(weight);
  v(bias);
}

void Conv1d::reset_parameters(RngStream& rng) {
  fan_in_uniform(weight, in_ch_ * kernel_, rng);
  fan_in_uniform(bias, in_ch_ * kernel_, rng);
}

nlohmann::json Conv1d::config() const {
  return {{"in_ch", in_ch_}, {"out_ch", out_ch_}, {"kernel", kernel_}, {"stride", stride_}, {"padding", padding_}};
}

// ------------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(std::int64_t channels, double eps, double momentum)
    : gamma({channels}),
      beta({channels}),
      running_mean({channels}),
      running_var({channels}),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {
  if (channels < 1) throw std::invalid_argument("batchnorm1d: channels must be positive");
  gamma.fill(1.0);
  running_var.fill(1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  require(x.rank() == 3 && x.dim(1) == channels_,
          "batchnorm1d: expected (B," + std::to_string(channels_) + ",L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), len = x.dim(2);
  const std::int64_t m = batch * len;

  Tensor y(x.shape());
  Tensor xhat(x.shape());
  Tensor istd({channels_});

  for (std::int64_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (pass.training) {
      double s = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* xr = &x.at(b, c, 0);
        for (std::int64_t t = 0; t < len; ++t) s += xr[t];
      }
      mean = s / static_cast<double>(m);
      double sq = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* xr = &x.at(b, c, 0);
        for (std::int64_t t = 0; t < len; ++t) sq += (xr[t] - mean) * (xr[t] - mean);
      }
      var = sq / static_cast<double>(m);  // biased, used for normalization
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean;
      running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    istd[c] = inv;
    const double g = gamma[c], bta = beta[c];
    for (std::int64_t b = 0; b < batch; ++b) {
      const double* xr = &x.at(b, c, 0);
      double* hr = &xhat.at(b, c, 0);
      double* yr = &y.at(b, c, 0);
      for (std::int64_t t = 0; t < len; ++t) {
        hr[t] = (xr[t] - mean) * inv;
        yr[t] = g * hr[t] + bta;
      }
    }
  }
  ctx.saved = {std::move(xhat), std::move(istd), scalar_tensor(pass.training ? 1.0 : 0.0)};
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const Tensor& xhat = ctx.saved[0];
  const Tensor& istd = ctx.saved[1];
  const bool trained_stats = ctx.saved[2][0] != 0.0;
  const std::int64_t batch = gy.dim(0), len = gy.dim(2);
  const std::int64_t m = batch * len;

  Tensor gx(gy.shape());
  Tensor& ggamma = pgrads[0];
  Tensor& gbeta = pgrads[1];

  for (std::int64_t c = 0; c < channels_; ++c) {
    double dg = 0, db = 0;
    for (std::int64_t b = 0; b < batch; ++b) {
      const double* gyr = &gy.at(b, c, 0);
      const double* hr = &xhat.at(b, c, 0);
      for (std::int64_t t = 0; t < len; ++t) {
        dg += gyr[t] * hr[t];
        db += gyr[t];
      }
    }
    ggamma[c] += dg;
    gbeta[c] += db;

    const double scale = gamma[c] * istd[c];
    if (trained_stats) {
      // gradient through the batch statistics
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* gyr = &gy.at(b, c, 0);
        const double* hr = &xhat.at(b, c, 0);
        double* gxr = &gx.at(b, c, 0);
        for (std::int64_t t = 0; t < len; ++t) {
          gxr[t] = scale * (gyr[t] - inv_m * (db + hr[t] * dg));
        }
      }
    } else {
      for (std::int64_t b = 0; b < batch; ++b) {
        const double* gyr = &gy.at(b, c, 0);
        double* gxr = &gx.at(b, c, 0);
        for (std::int64_t t = 0; t < len; ++t) gxr[t] = scale * gyr[t];
      }
    }
  }
  return gx;
}

void BatchNorm1d::visit_params(const ParamVisitor& v) {
  v(gamma);
  v(beta);
}

void BatchNorm1d::visit_buffers(const ParamVisitor& v) {
  v(running_mean);
  v(running_var);
}

void BatchNorm1d::reset_parameters(RngStream&) {
  gamma.fill(1.0);
  beta.zero();
  running_mean.zero();
  running_var.fill(1.0);
}

nlohmann::json BatchNorm1d::config() const {
  return {{"channels", channels_}, {"eps", eps_}, {"momentum", momentum_}};
}

// --------------------------------------------------------------- MaxPool1d

MaxPool1d::MaxPool1d(std::int64_t kernel, std::int64_t stride)
    : kernel_(kernel), stride_(stride > 0 ? stride : kernel) {
  if (kernel < 1) throw std::invalid_argument("maxpool1d: kernel must be positive");
}

Tensor MaxPool1d::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 3, "maxpool1d: expected (B,C,L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const std::int64_t lo = (len - kernel_) / stride_ + 1;
  require(lo >= 1, "maxpool1d: input length " + std::to_string(len) + " shorter than kernel");

  Tensor y({batch, ch, lo});
  Tensor arg({batch, ch, lo});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < ch; ++c) {
      const double* xr = &x.at(b, c, 0);
      for (std::int64_t t = 0; t < lo; ++t) {
        std::int64_t best = t * stride_;
        double bv = xr[best];
        for (std::int64_t k = 1; k < kernel_; ++k) {
          const std::int64_t i = t * stride_ + k;
          if (xr[i] > bv) {  // first max wins ties
            bv = xr[i];
            best = i;
          }
        }
        y.at(b, c, t) = bv;
        arg.at(b, c, t) = static_cast<double>(best);
      }
    }
  }
  ctx.saved = {std::move(arg), scalar_tensor(static_cast<double>(len))};
  return y;
}

Tensor MaxPool1d::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const Tensor& arg = ctx.saved[0];
  const auto len = static_cast<std::int64_t>(ctx.saved[1][0]);
  const std::int64_t batch = gy.dim(0), ch = gy.dim(1), lo = gy.dim(2);
  Tensor gx({batch, ch, len});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < ch; ++c) {
      for (std::int64_t t = 0; t < lo; ++t) {
        gx.at(b, c, static_cast<std::int64_t>(arg.at(b, c, t))) += gy.at(b, c, t);
      }
    }
  }
  return gx;
}

nlohmann::json MaxPool1d::config() const {
  return {{"kernel", kernel_}, {"stride", stride_}};
}

// ------------------------------------------------------- AdaptiveAvgPool1d

AdaptiveAvgPool1d::AdaptiveAvgPool1d(std::int64_t out_len) : out_len_(out_len) {
  if (out_len < 1) throw std::invalid_argument("adaptiveavgpool1d: out_len must be positive");
}

Tensor AdaptiveAvgPool1d::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 3, "adaptiveavgpool1d: expected (B,C,L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  require(len >= 1, "adaptiveavgpool1d: empty input");

  Tensor y({batch, ch, out_len_});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < ch; ++c) {
      const double* xr = &x.at(b, c, 0);
      for (std::int64_t t = 0; t < out_len_; ++t) {
        const std::int64_t s = t * len / out_len_;
        const std::int64_t e = ((t + 1) * len + out_len_ - 1) / out_len_;
        double sum = 0;
        for (std::int64_t i = s; i < e; ++i) sum += xr[i];
        y.at(b, c, t) = sum / static_cast<double>(e - s);
      }
    }
  }
  ctx.saved = {scalar_tensor(static_cast<double>(len))};
  return y;
}

Tensor AdaptiveAvgPool1d::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const auto len = static_cast<std::int64_t>(ctx.saved[0][0]);
  const std::int64_t batch = gy.dim(0), ch = gy.dim(1);
  Tensor gx({batch, ch, len});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t c = 0; c < ch; ++c) {
      for (std::int64_t t = 0; t < out_len_; ++t) {
        const std::int64_t s = t * len / out_len_;
        const std::int64_t e = ((t + 1) * len + out_len_ - 1) / out_len_;
        const double share = gy.at(b, c, t) / static_cast<double>(e - s);
        for (std::int64_t i = s; i < e; ++i) gx.at(b, c, i) += share;
      }
    }
  }
  return gx;
}

nlohmann::json AdaptiveAvgPool1d::config() const {
  return {{"out_len", out_len_}};
}

// -------------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0 ? x[i] : 0.0;
  ctx.saved = {x};
  return y;
}

Tensor ReLU::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const Tensor& x = ctx.saved[0];
  Tensor gx(gy.shape());
  for (std::int64_t i = 0; i < gy.size(); ++i) gx[i] = x[i] > 0 ? gy[i] : 0.0;
  return gx;
}

nlohmann::json ReLU::config() const {
  return nlohmann::json::object();
}

// ----------------------------------------------------------------- Softmax

Tensor Softmax::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() >= 2, "softmax: expected rank >= 2, got " + x.shape_str());
  const std::int64_t rows = leading_rows(x);
  const std::int64_t cols = x.dim(x.rank() - 1);
  Tensor y(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    double mx = xr[0];
    for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
    double sum = 0;
    for (std::int64_t c = 0; c < cols; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (std::int64_t c = 0; c < cols; ++c) yr[c] /= sum;
  }
  ctx.saved = {y};
  return y;
}

Tensor Softmax::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const Tensor& y = ctx.saved[0];
  const std::int64_t rows = leading_rows(y);
  const std::int64_t cols = y.dim(y.rank() - 1);
  Tensor gx(gy.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* yr = y.data() + r * cols;
    const double* gyr = gy.data() + r * cols;
    double* gxr = gx.data() + r * cols;
    const double inner = dot(yr, gyr, cols);
    for (std::int64_t c = 0; c < cols; ++c) gxr[c] = yr[c] * (gyr[c] - inner);
  }
  return gx;
}

nlohmann::json Softmax::config() const {
  return nlohmann::json::object();
}

// ----------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  ctx.saved.clear();
  if (rate_ == 0.0 || !pass.stochastic()) {
    return x;  // inverted-dropout identity
  }
  if (pass.rng == nullptr) {
    throw std::invalid_argument("dropout: stochastic pass requires an rng stream");
  }
  const double keep = 1.0 - rate_;
  const double scale = 1.0 / keep;
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double m = pass.rng->uniform() < keep ? scale : 0.0;
    mask[i] = m;
    y[i] = x[i] * m;
  }
  ctx.saved = {std::move(mask)};
  return y;
}

Tensor Dropout::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  if (ctx.saved.empty()) return gy;
  const Tensor& mask = ctx.saved[0];
  Tensor gx(gy.shape());
  for (std::int64_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * mask[i];
  return gx;
}

nlohmann::json Dropout::config() const {
  return {{"rate", rate_}};
}

// -------------------------------------------------------------- AsChannels

Tensor AsChannels::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 2, "as_channels: expected (B,L), got " + x.shape_str());
  ctx.saved = {shape_tensor(x.shape())};
  return x.reshaped({x.dim(0), 1, x.dim(1)});
}

Tensor AsChannels::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  return gy.reshaped(shape_from_tensor(ctx.saved[0]));
}

nlohmann::json AsChannels::config() const {
  return nlohmann::json::object();
}

// ---------------------------------------------------------------- Patchify

Patchify::Patchify(std::int64_t patch_len) : patch_len_(patch_len) {
  if (patch_len < 1) throw std::invalid_argument("patchify: patch_len must be positive");
}

Tensor Patchify::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 2, "patchify: expected (B,L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), len = x.dim(1);
  if (patch_len_ > len) {
    throw ConfigError("patchify: patch_len " + std::to_string(patch_len_) + " exceeds segment length " +
                      std::to_string(len));
  }
  const std::int64_t tokens = (len + patch_len_ - 1) / patch_len_;
  Tensor y({batch, tokens, patch_len_});
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* xr = x.data() + b * len;
    double* yr = y.data() + b * tokens * patch_len_;
    std::copy(xr, xr + len, yr);  // tail beyond len stays zero-padded
  }
  ctx.saved = {scalar_tensor(static_cast<double>(len))};
  return y;
}

Tensor Patchify::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const auto len = static_cast<std::int64_t>(ctx.saved[0][0]);
  const std::int64_t batch = gy.dim(0);
  const std::int64_t padded = gy.dim(1) * gy.dim(2);
  Tensor gx({batch, len});
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* gyr = gy.data() + b * padded;
    std::copy(gyr, gyr + len, gx.data() + b * len);
  }
  return gx;
}

nlohmann::json Patchify::config() const {
  return {{"patch_len", patch_len_}};
}

// ----------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() >= 2, "flatten: expected rank >= 2, got " + x.shape_str());
  ctx.saved = {shape_tensor(x.shape())};
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  return gy.reshaped(shape_from_tensor(ctx.saved[0]));
}

nlohmann::json Flatten::config() const {
  return nlohmann::json::object();
}

// ---------------------------------------------------------------- LastStep

Tensor LastStep::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 3, "last_step: expected (B,T,H), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), steps = x.dim(1), h = x.dim(2);
  Tensor y({batch, h});
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* src = &x.at(b, steps - 1, 0);
    std::copy(src, src + h, y.data() + b * h);
  }
  ctx.saved = {scalar_tensor(static_cast<double>(steps))};
  return y;
}

Tensor LastStep::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const auto steps = static_cast<std::int64_t>(ctx.saved[0][0]);
  const std::int64_t batch = gy.dim(0), h = gy.dim(1);
  Tensor gx({batch, steps, h});
  for (std::int64_t b = 0; b < batch; ++b) {
    std::copy(gy.data() + b * h, gy.data() + (b + 1) * h, &gx.at(b, steps - 1, 0));
  }
  return gx;
}

nlohmann::json LastStep::config() const {
  return nlohmann::json::object();
}

// ------------------------------------------------------------ MeanOverTime

Tensor MeanOverTime::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 3, "mean_over_time: expected (B,T,D), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), steps = x.dim(1), d = x.dim(2);
  Tensor y({batch, d});
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::int64_t b = 0; b < batch; ++b) {
    double* yr = y.data() + b * d;
    for (std::int64_t t = 0; t < steps; ++t) {
      axpy(inv, &x.at(b, t, 0), yr, d);
    }
  }
  ctx.saved = {scalar_tensor(static_cast<double>(steps))};
  return y;
}

Tensor MeanOverTime::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor>) const {
  const auto steps = static_cast<std::int64_t>(ctx.saved[0][0]);
  const std::int64_t batch = gy.dim(0), d = gy.dim(1);
  Tensor gx({batch, steps, d});
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::int64_t b = 0; b < batch; ++b) {
    const double* gyr = gy.data() + b * d;
    for (std::int64_t t = 0; t < steps; ++t) {
      double* gxr = &gx.at(b, t, 0);
      for (std::int64_t i = 0; i < d; ++i) gxr[i] = gyr[i] * inv;
    }
  }
  return gx;
}

nlohmann::json MeanOverTime::config() const {
  return nlohmann::json::object();
}

// -------------------------------------------------------- SpectrogramLayer

SpectrogramLayer::SpectrogramLayer(StftConfig cfg, bool standardize) : cfg_(cfg), standardize_(standardize) {
  cfg_.validate();
}

Tensor SpectrogramLayer::forward(const Tensor& x, const Pass&, LayerCtx& ctx) const {
  require(x.rank() == 2, "spectrogram: expected (B,L), got " + x.shape_str());
  const std::int64_t batch = x.dim(0), len = x.dim(1);
  const int frames = cfg_.num_frames(static_cast<int>(len));
  const int bins = cfg_.num_bins();
  require(frames >= 1, "spectrogram: signal shorter than window");

  Tensor y({batch, frames, bins});
  parallel_for(batch, [&](std::int64_t b0, std::int64_t b1) {
    for (std::int64_t b = b0; b < b1; ++b) {
      auto spec = ecguq::spectrogram(std::span<const double>(x.data() + b * len, static_cast<std::size_t>(len)), cfg_);
      if (standardize_) standardize(spec);
      std::copy(spec.values.begin(), spec.values.end(), y.data() + b * frames * bins);
    }
  });
  ctx.saved = {shape_tensor(x.shape())};
  return y;
}

Tensor SpectrogramLayer::backward(const Tensor&, const LayerCtx& ctx, std::span<Tensor>) const {
  // Fixed front end: gradient does not flow into the raw signal.
  return Tensor(shape_from_tensor(ctx.saved[0]));
}

nlohmann::json SpectrogramLayer::config() const {
  return {{"window_len", cfg_.window_len},
          {"hop", cfg_.hop},
          {"fft_len", cfg_.fft_len},
          {"window_fn", static_cast<int>(cfg_.window_fn)},
          {"log_scale", cfg_.log_scale},
          {"standardize", standardize_}};
}

// -------------------------------------------------------------- Sequential

Sequential::Sequential(std::vector<std::unique_ptr<Layer>> children) : children_(std::move(children)) {}

void Sequential::add(std::unique_ptr<Layer> layer) {
  children_.push_back(std::move(layer));
}

Tensor Sequential::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  ctx.children.resize(children_.size());
  Tensor cur = x;
  for (std::size_t i = 0; i < children_.size(); ++i) {
    try {
      cur = children_[i]->forward(cur, pass, ctx.children[i]);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + children_[i]->kind() + "): " + e.what());
    }
  }
  return cur;
}

Tensor Sequential::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  std::vector<std::size_t> offsets(children_.size() + 1, 0);
  for (std::size_t i = 0; i < children_.size(); ++i) {
    offsets[i + 1] = offsets[i] + static_cast<std::size_t>(children_[i]->num_param_tensors());
  }
  Tensor cur = gy;
  for (std::size_t i = children_.size(); i-- > 0;) {
    cur = children_[i]->backward(cur, ctx.children[i], pgrads.subspan(offsets[i], offsets[i + 1] - offsets[i]));
  }
  return cur;
}

void Sequential::visit_params(const ParamVisitor& v) {
  for (auto& c : children_) c->visit_params(v);
}

void Sequential::visit_buffers(const ParamVisitor& v) {
  for (auto& c : children_) c->visit_buffers(v);
}

void Sequential::visit_layers(const std::function<void(const Layer&)>& v) const {
  v(*this);
  for (const auto& c : children_) c->visit_layers(v);
}

void Sequential::reset_parameters(RngStream& rng) {
  for (auto& c : children_) c->reset_parameters(rng);
}

nlohmann::json Sequential::config() const {
  nlohmann::json kids = nlohmann::json::array();
  for (const auto& c : children_) kids.push_back(layer_to_json(*c));
  return {{"children", kids}};
}

// --------------------------------------------------------------- TwoBranch

TwoBranch::TwoBranch(std::unique_ptr<Layer> left, std::unique_ptr<Layer> right)
    : left_(std::move(left)), right_(std::move(right)) {}

Tensor TwoBranch::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  ctx.children.resize(2);
  Tensor a = left_->forward(x, pass, ctx.children[0]);
  Tensor b = right_->forward(x, pass, ctx.children[1]);
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "two_branch: branch outputs must be (B,D), got " + a.shape_str() + " and " + b.shape_str());
  const std::int64_t batch = a.dim(0), da = a.dim(1), db = b.dim(1);
  Tensor y({batch, da + db});
  for (std::int64_t r = 0; r < batch; ++r) {
    std::copy(a.data() + r * da, a.data() + (r + 1) * da, y.data() + r * (da + db));
    std::copy(b.data() + r * db, b.data() + (r + 1) * db, y.data() + r * (da + db) + da);
  }
  ctx.saved = {scalar_tensor(static_cast<double>(da)), scalar_tensor(static_cast<double>(db))};
  return y;
}

Tensor TwoBranch::backward(const Tensor& gy, const LayerCtx& ctx, std::span<Tensor> pgrads) const {
  const auto da = static_cast<std::int64_t>(ctx.saved[0][0]);
  const auto db = static_cast<std::int64_t>(ctx.saved[1][0]);
  const std::int64_t batch = gy.dim(0);
  Tensor ga({batch, da});
  Tensor gb({batch, db});
  for (std::int64_t r = 0; r < batch; ++r) {
    std::copy(gy.data() + r * (da + db), gy.data() + r * (da + db) + da, ga.data() + r * da);
    std::copy(gy.data() + r * (da + db) + da, gy.data() + (r + 1) * (da + db), gb.data() + r * db);
  }
  const auto n_left = static_cast<std::size_t>(left_->num_param_tensors());
  Tensor gxa = left_->backward(ga, ctx.children[0], pgrads.subspan(0, n_left));
  Tensor gxb = right_->backward(gb, ctx.children[1], pgrads.subspan(n_left));
  require(gxa.same_shape(gxb), "two_branch: branch input gradients disagree in shape");
  for (std::int64_t i = 0; i < gxa.size(); ++i) gxa[i] += gxb[i];
  return gxa;
}

void TwoBranch::visit_params(const ParamVisitor& v) {
  left_->visit_params(v);
  right_->visit_params(v);
}

void TwoBranch::visit_buffers(const ParamVisitor& v) {
  left_->visit_buffers(v);
  right_->visit_buffers(v);
}

void TwoBranch::visit_layers(const std::function<void(const Layer&)>& v) const {
  v(*this);
  left_->visit_layers(v);
  right_->visit_layers(v);
}

void TwoBranch::reset_parameters(RngStream& rng) {
  left_->reset_parameters(rng);
  right_->reset_parameters(rng);
}

nlohmann::json TwoBranch::config() const {
  return {{"left", layer_to_json(*left_)}, {"right", layer_to_json(*right_)}};
}

}  // namespace ecguq::nn
