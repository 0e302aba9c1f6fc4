#include "ecguq/nn/network.hpp"

#include <cstring>

#include "ecguq/nn/layers.hpp"
#include "ecguq/nn/lstm.hpp"
#include "ecguq/nn/transformer.hpp"

namespace ecguq::nn {

Tensor Network::forward(const Tensor& x, const Pass& pass) const {
  LayerCtx ctx;
  return root_->forward(x, pass, ctx);
}

Tensor Network::forward(const Tensor& x, const Pass& pass, LayerCtx& ctx) const {
  return root_->forward(x, pass, ctx);
}

Tensor Network::backward(const Tensor& gy, const LayerCtx& ctx, std::vector<Tensor>& pgrads) const {
  return root_->backward(gy, ctx, std::span<Tensor>(pgrads));
}

std::vector<Tensor*> Network::params() {
  std::vector<Tensor*> out;
  root_->visit_params([&out](Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<Tensor> Network::make_grad_buffers() {
  std::vector<Tensor> out;
  root_->visit_params([&out](Tensor& t) { out.emplace_back(t.shape()); });
  return out;
}

std::int64_t Network::param_count() {
  std::int64_t n = 0;
  root_->visit_params([&n](Tensor& t) { n += t.size(); });
  return n;
}

void Network::reset_parameters(std::uint64_t seed) {
  RngStream rng(mix_seed({seed, 0x696e6974ULL}));  // "init"
  root_->reset_parameters(rng);
}

bool Network::has_stochastic_dropout() const {
  bool found = false;
  root_->visit_layers([&found](const Layer& l) {
    if (const auto* d = dynamic_cast<const Dropout*>(&l); d && d->rate() > 0.0) found = true;
    if (const auto* t = dynamic_cast<const TransformerEncoder*>(&l); t && t->dropout_rate() > 0.0) found = true;
  });
  return found;
}

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<Layer> from_json_impl(const nlohmann::json& j);

StftConfig stft_from_config(const nlohmann::json& j) {
  StftConfig cfg;
  cfg.window_len = j.at("window_len").get<int>();
  cfg.hop = j.at("hop").get<int>();
  cfg.fft_len = j.at("fft_len").get<int>();
  cfg.window_fn = static_cast<StftConfig::Window>(j.at("window_fn").get<int>());
  cfg.log_scale = j.at("log_scale").get<bool>();
  return cfg;
}

std::unique_ptr<Layer> make_layer(const std::string& kind, const nlohmann::json& j) {
  if (kind == "linear") return std::make_unique<Linear>(j.at("in_dim").get<std::int64_t>(), j.at("out_dim").get<std::int64_t>());
  if (kind == "conv1d") {
    return std::make_unique<Conv1d>(j.at("in_ch").get<std::int64_t>(), j.at("out_ch").get<std::int64_t>(),
                                    j.at("kernel").get<std::int64_t>(), j.at("stride").get<std::int64_t>(),
                                    j.at("padding").get<std::int64_t>());
  }
  if (kind == "batchnorm1d") {
    return std::make_unique<BatchNorm1d>(j.at("channels").get<std::int64_t>(), j.at("eps").get<double>(),
                                         j.at("momentum").get<double>());
  }
  if (kind == "maxpool1d") return std::make_unique<MaxPool1d>(j.at("kernel").get<std::int64_t>(), j.at("stride").get<std::int64_t>());
  if (kind == "adaptiveavgpool1d") return std::make_unique<AdaptiveAvgPool1d>(j.at("out_len").get<std::int64_t>());
  if (kind == "relu") return std::make_unique<ReLU>();
  if (kind == "softmax") return std::make_unique<Softmax>();
  if (kind == "dropout") return std::make_unique<Dropout>(j.at("rate").get<double>());
  if (kind == "as_channels") return std::make_unique<AsChannels>();
  if (kind == "patchify") return std::make_unique<Patchify>(j.at("patch_len").get<std::int64_t>());
  if (kind == "flatten") return std::make_unique<Flatten>();
  if (kind == "last_step") return std::make_unique<LastStep>();
  if (kind == "mean_over_time") return std::make_unique<MeanOverTime>();
  if (kind == "spectrogram") return std::make_unique<SpectrogramLayer>(stft_from_config(j), j.at("standardize").get<bool>());
  if (kind == "lstm") {
    return std::make_unique<Lstm>(j.at("input_dim").get<std::int64_t>(), j.at("hidden_dim").get<std::int64_t>(),
                                  j.at("num_layers").get<std::int64_t>());
  }
  if (kind == "transformer_encoder") {
    return std::make_unique<TransformerEncoder>(j.at("model_dim").get<std::int64_t>(), j.at("num_heads").get<std::int64_t>(),
                                                j.at("num_layers").get<std::int64_t>(), j.at("ff_dim").get<std::int64_t>(),
                                                j.at("dropout_rate").get<double>(), j.at("seq_len").get<std::int64_t>());
  }
  if (kind == "sequential") {
    auto seq = std::make_unique<Sequential>();
    for (const auto& kid : j.at("children")) seq->add(from_json_impl(kid));
    return seq;
  }
  if (kind == "two_branch") {
    return std::make_unique<TwoBranch>(from_json_impl(j.at("left")), from_json_impl(j.at("right")));
  }
  throw CheckpointError("unknown layer kind '" + kind + "'");
}

std::unique_ptr<Layer> from_json_impl(const nlohmann::json& j) {
  return make_layer(j.at("kind").get<std::string>(), j);
}

}  // namespace

std::unique_ptr<Layer> layer_from_json(const nlohmann::json& j) {
  return from_json_impl(j);
}

nlohmann::json network_to_json(Network& net) {
  nlohmann::json j;
  j["net"] = layer_to_json(net.root());
  auto params = nlohmann::json::array();
  net.root().visit_params([&params](Tensor& t) { params.push_back(t.values()); });
  auto buffers = nlohmann::json::array();
  net.root().visit_buffers([&buffers](Tensor& t) { buffers.push_back(t.values()); });
  j["params"] = std::move(params);
  j["buffers"] = std::move(buffers);
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  Network net(layer_from_json(j.at("net")));

  const auto& params = j.at("params");
  std::size_t idx = 0;
  net.root().visit_params([&](Tensor& t) {
    if (idx >= params.size()) throw CheckpointError("parameter list shorter than the layer stack expects");
    auto vals = params[idx].get<std::vector<double>>();
    if (static_cast<std::int64_t>(vals.size()) != t.size()) {
      throw CheckpointError("parameter " + std::to_string(idx) + " size mismatch");
    }
    t.values() = std::move(vals);
    ++idx;
  });
  if (idx != params.size()) throw CheckpointError("parameter list longer than the layer stack expects");

  const auto& buffers = j.at("buffers");
  idx = 0;
  net.root().visit_buffers([&](Tensor& t) {
    if (idx >= buffers.size()) throw CheckpointError("buffer list shorter than the layer stack expects");
    auto vals = buffers[idx].get<std::vector<double>>();
    if (static_cast<std::int64_t>(vals.size()) != t.size()) {
      throw CheckpointError("buffer " + std::to_string(idx) + " size mismatch");
    }
    t.values() = std::move(vals);
    ++idx;
  });
  if (idx != buffers.size()) throw CheckpointError("buffer list longer than the layer stack expects");

  return net;
}

}  // namespace ecguq::nn
