#pragma once

#include <span>
#include <vector>

#include "ecguq/models.hpp"

namespace ecguq {

// Shannon entropy in nats, 0*ln(0) == 0. Throws std::invalid_argument if the
// input is not a probability vector (|sum - 1| > 1e-6 or negative entries).
double predictive_entropy(std::span<const double> probs);

struct UqPrediction {
  std::vector<double> mean_probs;
  double entropy = 0.0;             // nats, in [0, ln C]
  double entropy_normalized = 0.0;  // entropy / ln C
  int predicted_class = 0;          // argmax, lowest index on ties
  bool certain = false;             // set by thresholding later
};

struct UqConfig {
  enum class Method { kMcd, kEnsemble, kEmcd };
  Method method = Method::kMcd;
  int passes = 30;   // T, stochastic passes per model (mcd, emcd)
  int members = 5;   // N, ensemble size (ensemble, emcd)
  std::uint64_t base_seed = 0;

  void validate() const;
  const char* method_name() const;
  static Method method_from_name(const std::string& name);
  int required_members() const { return method == Method::kMcd ? 1 : members; }
};

// T stochastic forward passes with dropout live; the mean of the per-pass
// softmax outputs is the prediction and its entropy the uncertainty score.
// Pass streams derive from (base_seed, record_index, member_index, pass), so
// results do not depend on evaluation order. A model without any stochastic
// dropout degrades to a deterministic prediction; warn_degenerate controls
// the stderr note in that case.
UqPrediction mcd_predict(const Model& model, const Tensor& x, int passes, std::uint64_t base_seed,
                         std::int64_t record_index = 0, int member_index = 0, bool warn_degenerate = true);

// Average of the members' deterministic predictive distributions.
UqPrediction ensemble_predict(std::span<const Model* const> members, const Tensor& x);

// Per-member MCD average, then average across members.
UqPrediction emcd_predict(std::span<const Model* const> members, const Tensor& x, int passes,
                          std::uint64_t base_seed, std::int64_t record_index = 0);

// One prediction per row of inputs (N, 187), order-preserving and fully
// reproducible from cfg.base_seed; parallel across records.
std::vector<UqPrediction> batch_uq(std::span<const Model* const> members, const Tensor& inputs,
                                   const UqConfig& cfg);

// Prediction dump: record_index, true_label, predicted_class, C probability
// columns, entropy, entropy_normalized.
void write_prediction_csv(const std::string& path, std::span<const UqPrediction> preds,
                          std::span<const int> labels);

}  // namespace ecguq
