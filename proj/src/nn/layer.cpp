#include "ecguq/nn/layer.hpp"

#include <cmath>

namespace ecguq::nn {

int Layer::num_param_tensors() const {
  int n = 0;
  // visit_params is logically const here; the visitor only counts.
  const_cast<Layer*>(this)->visit_params([&n](Tensor&) { ++n; });
  return n;
}

nlohmann::json layer_to_json(const Layer& layer) {
  nlohmann::json j = layer.config();
  j["kind"] = layer.kind();
  return j;
}

void fan_in_uniform(Tensor& t, std::int64_t fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

}  // namespace ecguq::nn
