#include "ecguq/uq.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace ecguq {

double predictive_entropy(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("predictive_entropy: empty distribution");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || p > 1.0 + 1e-9) {
      throw std::invalid_argument("predictive_entropy: entry outside [0,1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("predictive_entropy: probabilities sum to " + std::to_string(sum));
  }
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;  // clamp the -0.0 / rounding edge
}

void UqConfig::validate() const {
  if (passes < 1) throw std::invalid_argument("uq: passes (T) must be >= 1");
  if (members < 1) throw std::invalid_argument("uq: members (N) must be >= 1");
}

const char* UqConfig::method_name() const {
  switch (method) {
    case Method::kMcd:
      return "mcd";
    case Method::kEnsemble:
      return "ensemble";
    case Method::kEmcd:
      return "emcd";
  }
  return "?";
}

UqConfig::Method UqConfig::method_from_name(const std::string& name) {
  if (name == "mcd") return Method::kMcd;
  if (name == "ensemble") return Method::kEnsemble;
  if (name == "emcd") return Method::kEmcd;
  throw ConfigError("unknown uq method '" + name + "' (expected mcd, ensemble or emcd)");
}

namespace {

Tensor as_row(const Tensor& x) {
  if (x.rank() == 1) return x.reshaped({1, x.dim(0)});
  if (x.rank() == 2 && x.dim(0) == 1) return x;
  throw std::invalid_argument("uq: expected a single input record");
}

UqPrediction finalize(std::vector<double> mean_probs) {
  UqPrediction p;
  p.entropy = predictive_entropy(mean_probs);
  const double log_c = std::log(static_cast<double>(mean_probs.size()));
  p.entropy_normalized = log_c > 0.0 ? p.entropy / log_c : 0.0;
  p.predicted_class = 0;
  for (std::size_t c = 1; c < mean_probs.size(); ++c) {
    if (mean_probs[c] > mean_probs[static_cast<std::size_t>(p.predicted_class)]) {
      p.predicted_class = static_cast<int>(c);
    }
  }
  p.mean_probs = std::move(mean_probs);
  return p;
}

// Mean over T eval-stochastic passes, accumulated in pass order. Without any
// live dropout the passes are all identical, so one deterministic pass stands
// in for the average exactly (no T-fold rounding drift).
std::vector<double> mcd_mean(const Model& model, const Tensor& row, int passes, std::uint64_t base_seed,
                             std::int64_t record_index, int member_index) {
  if (!model.net.has_stochastic_dropout()) {
    nn::Pass pass;
    return model.net.forward(row, pass).values();
  }
  std::vector<double> acc;
  for (int t = 0; t < passes; ++t) {
    RngStream rng(mix_seed({base_seed, static_cast<std::uint64_t>(record_index),
                            static_cast<std::uint64_t>(member_index), static_cast<std::uint64_t>(t)}));
    nn::Pass pass{nn::DropoutMode::kEvalStochastic, /*training=*/false, &rng};
    Tensor probs = model.net.forward(row, pass);
    if (acc.empty()) acc.assign(static_cast<std::size_t>(probs.size()), 0.0);
    for (std::int64_t i = 0; i < probs.size(); ++i) acc[static_cast<std::size_t>(i)] += probs[i];
  }
  for (double& v : acc) v /= static_cast<double>(passes);
  return acc;
}

}  // namespace

UqPrediction mcd_predict(const Model& model, const Tensor& x, int passes, std::uint64_t base_seed,
                         std::int64_t record_index, int member_index, bool warn_degenerate) {
  if (passes < 1) throw std::invalid_argument("mcd: passes must be >= 1");
  if (warn_degenerate && !model.net.has_stochastic_dropout()) {
    std::cerr << "warning: mcd over a model without active dropout; entropy reflects softmax sharpness only\n";
  }
  return finalize(mcd_mean(model, as_row(x), passes, base_seed, record_index, member_index));
}

UqPrediction ensemble_predict(std::span<const Model* const> members, const Tensor& x) {
  if (members.empty()) throw std::invalid_argument("ensemble: no members");
  const int classes = members[0]->num_classes();
  for (const Model* m : members) {
    if (m->num_classes() != classes) {
      throw std::invalid_argument("ensemble: members disagree on class count");
    }
  }
  const Tensor row = as_row(x);
  std::vector<double> acc(static_cast<std::size_t>(classes), 0.0);
  nn::Pass pass;  // eval-deterministic
  for (const Model* m : members) {
    Tensor probs = m->net.forward(row, pass);
    for (std::int64_t i = 0; i < probs.size(); ++i) acc[static_cast<std::size_t>(i)] += probs[i];
  }
  for (double& v : acc) v /= static_cast<double>(members.size());
  return finalize(std::move(acc));
}

UqPrediction emcd_predict(std::span<const Model* const> members, const Tensor& x, int passes,
                          std::uint64_t base_seed, std::int64_t record_index) {
  if (members.empty()) throw std::invalid_argument("emcd: no members");
  if (passes < 1) throw std::invalid_argument("emcd: passes must be >= 1");
  const int classes = members[0]->num_classes();
  const Tensor row = as_row(x);
  std::vector<double> acc(static_cast<std::size_t>(classes), 0.0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i]->num_classes() != classes) {
      throw std::invalid_argument("emcd: members disagree on class count");
    }
    auto member_mean = mcd_mean(*members[i], row, passes, base_seed, record_index, static_cast<int>(i));
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += member_mean[c];
  }
  for (double& v : acc) v /= static_cast<double>(members.size());
  return finalize(std::move(acc));
}

std::vector<UqPrediction> batch_uq(std::span<const Model* const> members, const Tensor& inputs,
                                   const UqConfig& cfg) {
  cfg.validate();
  if (inputs.rank() != 2) throw std::invalid_argument("batch_uq: expected (N,feat) inputs");
  if (static_cast<int>(members.size()) < cfg.required_members()) {
    throw std::invalid_argument("batch_uq: method needs " + std::to_string(cfg.required_members()) +
                                " models, got " + std::to_string(members.size()));
  }
  if ((cfg.method == UqConfig::Method::kMcd || cfg.method == UqConfig::Method::kEmcd) &&
      !members.empty() && !members[0]->net.has_stochastic_dropout()) {
    std::cerr << "warning: " << cfg.method_name()
              << " over models without active dropout; entropy reflects softmax sharpness only\n";
  }

  const std::int64_t n = inputs.dim(0);
  const std::int64_t feat = n > 0 ? inputs.size() / n : 0;
  std::vector<UqPrediction> out(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      Tensor row({1, feat});
      std::copy(inputs.data() + r * feat, inputs.data() + (r + 1) * feat, row.data());
      switch (cfg.method) {
        case UqConfig::Method::kMcd:
          out[static_cast<std::size_t>(r)] =
              mcd_predict(*members[0], row, cfg.passes, cfg.base_seed, r, 0, /*warn_degenerate=*/false);
          break;
        case UqConfig::Method::kEnsemble:
          out[static_cast<std::size_t>(r)] = ensemble_predict(members.subspan(0, static_cast<std::size_t>(cfg.members)), row);
          break;
        case UqConfig::Method::kEmcd:
          out[static_cast<std::size_t>(r)] =
              emcd_predict(members.subspan(0, static_cast<std::size_t>(cfg.members)), row, cfg.passes, cfg.base_seed, r);
          break;
      }
    }
  });
  return out;
}

void write_prediction_csv(const std::string& path, std::span<const UqPrediction> preds,
                          std::span<const int> labels) {
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("prediction dump: prediction/label count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  out << "record_index,true_label,predicted_class";
  const std::size_t classes = preds.empty() ? 0 : preds[0].mean_probs.size();
  for (std::size_t c = 0; c < classes; ++c) out << ",prob_" << c;
  out << ",entropy,entropy_normalized\n";
  char buf[64];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out << i << ',' << labels[i] << ',' << preds[i].predicted_class;
    for (double p : preds[i].mean_probs) {
      std::snprintf(buf, sizeof(buf), "%.12g", p);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.12g", preds[i].entropy);
    out << ',' << buf;
    std::snprintf(buf, sizeof(buf), "%.12g", preds[i].entropy_normalized);
    out << ',' << buf << '\n';
  }
  if (!out) throw LoadError("write failed for " + path);
}

}  // namespace ecguq
