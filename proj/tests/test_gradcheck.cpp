#include <doctest.h>

#include <cmath>
#include <memory>

#include "ecguq/models.hpp"
#include "ecguq/nn/layers.hpp"
#include "ecguq/nn/lstm.hpp"
#include "ecguq/nn/network.hpp"
#include "ecguq/nn/transformer.hpp"
#include "gradcheck_support.hpp"

using namespace ecguq;
using nn::Layer;
using nn::LayerCtx;
using nn::Pass;
using gradsupport::GradHarness;
using gradsupport::close;
using gradsupport::init_layer;
using gradsupport::random_tensor;

namespace {

// Exhaustive check over every parameter and input element.
void check_layer(Layer& layer, Tensor input, double tol, bool training = false, bool stochastic = false) {
  const std::size_t bad = gradsupport::count_layer_mismatches(layer, std::move(input), tol, training, stochastic);
  CHECK(bad == 0);
}

// Deterministic random subsample of a model's parameters against the oracle.
void check_model_subsample(Layer& root, const Tensor& x, std::size_t samples, double tol,
                           std::uint64_t seed, bool training = false) {
  GradHarness h(root, x);
  h.training = training;
  auto [pgrads, gx] = h.analytic();
  (void)gx;
  std::vector<Tensor*> params;
  root.visit_params([&params](Tensor& t) { params.push_back(&t); });

  std::int64_t total = 0;
  for (const Tensor* p : params) total += p->size();
  RngStream rng(seed);
  std::size_t bad = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::int64_t flat = static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(total)));
    std::size_t pi = 0;
    while (flat >= params[pi]->size()) {
      flat -= params[pi]->size();
      ++pi;
    }
    const double numeric = h.fd(&(*params[pi])[flat]);
    if (!close(pgrads[pi][flat], numeric, tol)) {
      ++bad;
      if (bad <= 3) {
        MESSAGE("tensor ", pi, " index ", flat, ": analytic ", pgrads[pi][flat], " vs fd ", numeric);
      }
    }
  }
  CHECK(bad == 0);
}

}  // namespace

TEST_CASE("gradcheck: linear on 2D and 3D inputs") {
  nn::Linear lin(7, 5);
  init_layer(lin, 1);
  check_layer(lin, random_tensor({3, 7}, 2), 1e-4);
  nn::Linear lin2(4, 6);
  init_layer(lin2, 3);
  check_layer(lin2, random_tensor({2, 5, 4}, 4), 1e-4);
}

TEST_CASE("gradcheck: linear plus softmax matches finite differences") {
  auto net = std::make_unique<nn::Sequential>();
  net->add(std::make_unique<nn::Linear>(6, 4));
  net->add(std::make_unique<nn::Softmax>());
  init_layer(*net, 111);
  check_layer(*net, random_tensor({3, 6}, 112), 1e-4);
}

TEST_CASE("gradcheck: conv1d across stride and padding") {
  for (auto [stride, pad] : {std::pair<int, int>{1, 0}, {1, 2}, {2, 1}}) {
    nn::Conv1d conv(3, 4, 3, stride, pad);
    init_layer(conv, 7);
    check_layer(conv, random_tensor({2, 3, 8}, 11), 1e-4);
  }
}

TEST_CASE("gradcheck: batchnorm1d through batch statistics") {
  nn::BatchNorm1d bn(3);
  init_layer(bn, 13);
  // Move gamma/beta off the identity so the check is not vacuous.
  bn.gamma[0] = 1.3;
  bn.gamma[1] = 0.8;
  bn.beta[2] = -0.4;
  check_layer(bn, random_tensor({4, 3, 5}, 15), 1e-4, /*training=*/true);
}

TEST_CASE("gradcheck: batchnorm1d eval mode with running stats") {
  nn::BatchNorm1d bn(2);
  init_layer(bn, 21);
  bn.running_mean[0] = 0.2;
  bn.running_mean[1] = -0.1;
  bn.running_var[0] = 1.7;
  bn.running_var[1] = 0.6;
  check_layer(bn, random_tensor({3, 2, 4}, 22), 1e-4, /*training=*/false);
}

TEST_CASE("gradcheck: maxpool1d") {
  nn::MaxPool1d pool(2);
  check_layer(pool, random_tensor({2, 3, 9}, 31), 1e-4);
  nn::MaxPool1d pool3(3, 2);
  check_layer(pool3, random_tensor({2, 2, 11}, 32), 1e-4);
}

TEST_CASE("gradcheck: adaptive average pool") {
  nn::AdaptiveAvgPool1d pool(1);
  check_layer(pool, random_tensor({2, 4, 9}, 41), 1e-4);
  nn::AdaptiveAvgPool1d pool3(3);
  check_layer(pool3, random_tensor({2, 2, 10}, 42), 1e-4);
}

TEST_CASE("gradcheck: relu and softmax") {
  nn::ReLU relu;
  check_layer(relu, random_tensor({3, 6}, 51), 1e-4);
  nn::Softmax softmax;
  check_layer(softmax, random_tensor({3, 5}, 52, -2.0, 2.0), 1e-4);
}

TEST_CASE("gradcheck: dropout with a frozen mask") {
  nn::Dropout drop(0.4);
  check_layer(drop, random_tensor({4, 6}, 61), 1e-4, /*training=*/false, /*stochastic=*/true);
}

TEST_CASE("gradcheck: structural adapters") {
  nn::Patchify patch(4);
  check_layer(patch, random_tensor({2, 10}, 71), 1e-4);
  nn::Flatten flat;
  check_layer(flat, random_tensor({2, 3, 4}, 72), 1e-4);
  nn::LastStep last;
  check_layer(last, random_tensor({2, 5, 3}, 73), 1e-4);
  nn::MeanOverTime mean;
  check_layer(mean, random_tensor({2, 5, 3}, 74), 1e-4);
  nn::AsChannels chans;
  check_layer(chans, random_tensor({2, 9}, 75), 1e-4);
}

TEST_CASE("gradcheck: lstm(1,64,2) on a length-8 sequence, every parameter") {
  nn::Lstm lstm(1, 64, 2);
  init_layer(lstm, 81);
  check_layer(lstm, random_tensor({1, 8, 1}, 82), 1e-3);
}

TEST_CASE("gradcheck: small lstm with batch and wider input") {
  nn::Lstm lstm(3, 5, 2);
  init_layer(lstm, 83);
  check_layer(lstm, random_tensor({2, 4, 3}, 84), 1e-3);
}

TEST_CASE("gradcheck: transformer encoder, deterministic") {
  nn::TransformerEncoder enc(8, 2, 2, 16, 0.0, 3);
  init_layer(enc, 91);
  check_layer(enc, random_tensor({2, 3, 8}, 92), 1e-3);
}

TEST_CASE("gradcheck: transformer encoder with frozen dropout masks") {
  nn::TransformerEncoder enc(8, 2, 1, 16, 0.3, 3);
  init_layer(enc, 93);
  check_layer(enc, random_tensor({2, 3, 8}, 94), 1e-3, /*training=*/false, /*stochastic=*/true);
}

TEST_CASE("gradcheck: two-branch container") {
  auto left = std::make_unique<nn::Sequential>();
  left->add(std::make_unique<nn::Linear>(6, 4));
  left->add(std::make_unique<nn::ReLU>());
  auto right = std::make_unique<nn::Sequential>();
  right->add(std::make_unique<nn::Linear>(6, 3));
  nn::TwoBranch branch(std::move(left), std::move(right));
  init_layer(branch, 95);
  check_layer(branch, random_tensor({3, 6}, 96), 1e-4);
}

TEST_CASE("gradcheck: full architectures, sampled parameters") {
  const Tensor x = random_tensor({2, kSegmentLength}, 101, 0.0, 1.0);
  SUBCASE("cnn1d") {
    auto m = build_cnn1d(2, 0.2, 5);
    check_model_subsample(m.net.root(), x, 300, 1e-4, 102, /*training=*/true);
  }
  SUBCASE("lstm") {
    auto m = build_lstm(2, 0.2, 6);
    check_model_subsample(m.net.root(), x, 200, 1e-3, 103);
  }
  SUBCASE("transformer") {
    auto m = build_transformer(2, std::nullopt, 0.2, 7);
    check_model_subsample(m.net.root(), x, 200, 1e-3, 104);
  }
  SUBCASE("transformer patch mode") {
    auto m = build_transformer(2, 11, 0.2, 8);
    check_model_subsample(m.net.root(), x, 150, 1e-3, 105);
  }
  SUBCASE("uctecg") {
    auto m = build_uctecg(2, StftConfig{}, 0.2, 9);
    check_model_subsample(m.net.root(), x, 150, 1e-3, 106);
  }
}
