#include "ecguq/nn/train.hpp"

#include <algorithm>
#include <cmath>

#include "ecguq/data.hpp"

namespace ecguq::nn {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"optimizer", optimizer == Optimizer::kAdam ? "adam" : "sgd"},
                   {"learning_rate", learning_rate},
                   {"beta1", beta1},
                   {"beta2", beta2},
                   {"adam_eps", adam_eps},
                   {"batch_size", batch_size},
                   {"epochs", epochs},
                   {"seed", seed}};
  if (class_weights) {
    j["class_weights"] = *class_weights;
  } else {
    j["class_weights"] = nullptr;
  }
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  const std::string opt = j.value("optimizer", "adam");
  if (opt == "adam") {
    cfg.optimizer = Optimizer::kAdam;
  } else if (opt == "sgd") {
    cfg.optimizer = Optimizer::kSgd;
  } else {
    throw ConfigError("train: unknown optimizer '" + opt + "'");
  }
  cfg.learning_rate = j.value("learning_rate", 1e-3);
  cfg.beta1 = j.value("beta1", 0.9);
  cfg.beta2 = j.value("beta2", 0.999);
  cfg.adam_eps = j.value("adam_eps", 1e-8);
  cfg.batch_size = j.value("batch_size", 128);
  cfg.epochs = j.value("epochs", 1);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("class_weights") && !j.at("class_weights").is_null()) {
    cfg.class_weights = j.at("class_weights").get<std::vector<double>>();
  }
  return cfg;
}

double cross_entropy(const Tensor& probs, std::span<const int> targets,
                     const std::optional<std::vector<double>>& class_weights, Tensor* grad) {
  if (probs.rank() != 2) throw std::invalid_argument("cross_entropy: expected (B,C) probabilities");
  const std::int64_t batch = probs.dim(0), classes = probs.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != batch) {
    throw std::invalid_argument("cross_entropy: target count mismatch");
  }
  if (class_weights && static_cast<std::int64_t>(class_weights->size()) != classes) {
    throw std::invalid_argument("cross_entropy: class weight count mismatch");
  }

  if (grad) {
    *grad = Tensor(probs.shape());
  }
  double loss = 0.0, weight_sum = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    const int t = targets[static_cast<std::size_t>(b)];
    if (t < 0 || t >= classes) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(t) + " outside [0," +
                                  std::to_string(classes) + ")");
    }
    const double w = class_weights ? (*class_weights)[static_cast<std::size_t>(t)] : 1.0;
    const double p = std::max(probs.at(b, t), 1e-300);
    loss += -w * std::log(p);
    weight_sum += w;
    if (grad) grad->at(b, t) = -w / p;
  }
  if (weight_sum <= 0.0) throw std::invalid_argument("cross_entropy: non-positive total weight");
  if (grad) {
    for (std::int64_t i = 0; i < grad->size(); ++i) (*grad)[i] /= weight_sum;
  }
  return loss / weight_sum;
}

void AdamState::init(const std::vector<Tensor*>& params) {
  m.clear();
  v.clear();
  step = 0;
  for (const Tensor* p : params) {
    m.emplace_back(p->shape());
    v.emplace_back(p->shape());
  }
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const Tensor& g = grads[pi];
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    for (std::int64_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
    }
  }
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, double lr) {
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const Tensor& g = grads[pi];
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
}

namespace {

void gather_batch(const Tensor& inputs, const std::vector<int>& labels, std::span<const std::int32_t> idx,
                  Tensor& xb, std::vector<int>& yb) {
  const std::int64_t feat = inputs.size() / inputs.dim(0);
  xb = Tensor({static_cast<std::int64_t>(idx.size()), feat});
  yb.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::int64_t r = idx[i];
    std::copy(inputs.data() + r * feat, inputs.data() + (r + 1) * feat, xb.data() + static_cast<std::int64_t>(i) * feat);
    yb[i] = labels[static_cast<std::size_t>(r)];
  }
}

}  // namespace

TrainResult train(Network& net, const Tensor& inputs, const std::vector<int>& labels, int num_classes,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.rank() != 2 || inputs.dim(0) == 0) throw std::invalid_argument("train: empty training set");
  if (labels.size() != static_cast<std::size_t>(inputs.dim(0))) {
    throw std::invalid_argument("train: label count mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("train: label outside [0,C)");
  }

  auto params = net.params();
  auto grads = net.make_grad_buffers();

  AdamState adam;
  if (cfg.optimizer == TrainConfig::Optimizer::kAdam) adam.init(params);

  const std::int64_t n = inputs.dim(0);
  TrainResult result;
  Tensor xb;
  std::vector<int> yb;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches =
        make_batches(n, cfg.batch_size, mix_seed({cfg.seed, 0x73687566ULL, static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0;
    std::int64_t seen = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      gather_batch(inputs, labels, batches[bi], xb, yb);

      RngStream rng(mix_seed({cfg.seed, 0x64726f70ULL, static_cast<std::uint64_t>(epoch), bi}));
      Pass pass{DropoutMode::kTrainStochastic, /*training=*/true, &rng};
      LayerCtx ctx;
      Tensor probs = net.forward(xb, pass, ctx);

      Tensor gy;
      const double loss = cross_entropy(probs, yb, cfg.class_weights, &gy);
      if (!std::isfinite(loss)) {
        throw TrainError("loss diverged (non-finite) at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(bi));
      }
      epoch_loss += loss * static_cast<double>(yb.size());
      seen += static_cast<std::int64_t>(yb.size());

      for (auto& g : grads) g.zero();
      net.backward(gy, ctx, grads);

      if (cfg.optimizer == TrainConfig::Optimizer::kAdam) {
        adam_step(params, grads, adam, cfg);
      } else {
        sgd_step(params, grads, cfg.learning_rate);
      }
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

std::vector<int> predict_classes(const Network& net, const Tensor& inputs, int eval_batch) {
  const std::int64_t n = inputs.dim(0);
  const std::int64_t feat = n > 0 ? inputs.size() / n : 0;
  std::vector<int> out(static_cast<std::size_t>(n));
  Pass pass;  // eval-deterministic
  for (std::int64_t start = 0; start < n; start += eval_batch) {
    const std::int64_t end = std::min(n, start + eval_batch);
    Tensor xb({end - start, feat});
    std::copy(inputs.data() + start * feat, inputs.data() + end * feat, xb.data());
    Tensor probs = net.forward(xb, pass);
    const std::int64_t classes = probs.dim(1);
    for (std::int64_t b = 0; b < end - start; ++b) {
      const double* pr = probs.data() + b * classes;
      int best = 0;
      for (std::int64_t c = 1; c < classes; ++c) {
        if (pr[c] > pr[best]) best = static_cast<int>(c);  // lowest index wins ties
      }
      out[static_cast<std::size_t>(start + b)] = best;
    }
  }
  return out;
}

double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
  const auto preds = predict_classes(net, inputs);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (preds[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace ecguq::nn
