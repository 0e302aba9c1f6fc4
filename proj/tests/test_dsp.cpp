#include <doctest.h>

#include <cmath>
#include <vector>

#include "ecguq/dsp.hpp"

using namespace ecguq;

namespace {

// Brute-force O(N^2) DFT magnitude oracle, independent of the FFT path.
std::vector<double> dft_magnitudes(const std::vector<double>& frame, int fft_len) {
  std::vector<double> mags(static_cast<std::size_t>(fft_len / 2 + 1));
  for (int k = 0; k <= fft_len / 2; ++k) {
    double re = 0, im = 0;
    for (int n = 0; n < fft_len; ++n) {
      const double x = n < static_cast<int>(frame.size()) ? frame[static_cast<std::size_t>(n)] : 0.0;
      const double ang = -2.0 * M_PI * k * n / fft_len;
      re += x * std::cos(ang);
      im += x * std::sin(ang);
    }
    mags[static_cast<std::size_t>(k)] = std::hypot(re, im);
  }
  return mags;
}

StftConfig rect_cfg(int window, int hop, int fft, bool log_scale = false) {
  StftConfig cfg;
  cfg.window_len = window;
  cfg.hop = hop;
  cfg.fft_len = fft;
  cfg.window_fn = StftConfig::Window::kRectangular;
  cfg.log_scale = log_scale;
  return cfg;
}

}  // namespace

TEST_CASE("spectrogram dimensions follow the frame-count formula") {
  StftConfig cfg;  // defaults: window 32, hop 4, fft 32, hann, log
  std::vector<double> sig(187, 0.0);
  const auto spec = spectrogram(sig, cfg);
  CHECK(spec.frames == 39);
  CHECK(spec.bins == 17);
  CHECK(cfg.num_frames(187) == (187 - 32) / 4 + 1);
}

TEST_CASE("all-zero signal gives an all-zero spectrogram") {
  std::vector<double> sig(187, 0.0);
  auto cfg = rect_cfg(32, 4, 32);
  const auto spec = spectrogram(sig, cfg);
  for (double v : spec.values) CHECK(v == 0.0);
}

TEST_CASE("spectrogram matches the brute-force DFT oracle") {
  RngStream rng(123);
  std::vector<double> sig(187);
  for (double& v : sig) v = rng.uniform(-1.0, 1.0);
  auto cfg = rect_cfg(32, 4, 32);
  const auto spec = spectrogram(sig, cfg);
  for (int f = 0; f < spec.frames; ++f) {
    std::vector<double> frame(sig.begin() + f * cfg.hop, sig.begin() + f * cfg.hop + cfg.window_len);
    const auto oracle = dft_magnitudes(frame, cfg.fft_len);
    for (int b = 0; b < spec.bins; ++b) {
      CHECK(spec.at(f, b) == doctest::Approx(oracle[static_cast<std::size_t>(b)]).epsilon(1e-9));
    }
  }
}

TEST_CASE("pure cosine at a bin center concentrates in exactly one bin") {
  auto cfg = rect_cfg(32, 4, 32);
  const int k0 = 5;
  std::vector<double> sig(187);
  for (std::size_t n = 0; n < sig.size(); ++n) {
    sig[n] = std::cos(2.0 * M_PI * k0 * static_cast<double>(n) / cfg.fft_len);
  }
  const auto spec = spectrogram(sig, cfg);
  for (int f = 0; f < spec.frames; ++f) {
    const double peak = spec.at(f, k0);
    CHECK(peak == doctest::Approx(cfg.window_len / 2.0).epsilon(1e-9));
    for (int b = 0; b < spec.bins; ++b) {
      if (b != k0) CHECK(std::abs(spec.at(f, b)) <= 1e-9 * peak);
    }
  }
}

TEST_CASE("Parseval per frame with rectangular window") {
  RngStream rng(77);
  std::vector<double> sig(187);
  for (double& v : sig) v = rng.normal();
  auto cfg = rect_cfg(32, 16, 32);
  const auto spec = spectrogram(sig, cfg);
  for (int f = 0; f < spec.frames; ++f) {
    double frame_energy = 0;
    for (int n = 0; n < cfg.window_len; ++n) {
      const double x = sig[static_cast<std::size_t>(f * cfg.hop + n)];
      frame_energy += x * x;
    }
    // One-sided sum with symmetric-bin doubling equals N * sum(x^2) for the
    // unnormalized DFT.
    double one_sided = 0;
    for (int b = 0; b < spec.bins; ++b) {
      const double m2 = spec.at(f, b) * spec.at(f, b);
      const bool symmetric = b != 0 && b != cfg.fft_len / 2;
      one_sided += symmetric ? 2.0 * m2 : m2;
    }
    CHECK(one_sided / cfg.fft_len == doctest::Approx(frame_energy).epsilon(1e-6));
  }
}

TEST_CASE("time shift by one hop shifts frames by one index") {
  RngStream rng(31);
  std::vector<double> sig(187);
  for (double& v : sig) v = rng.uniform(-1.0, 1.0);
  StftConfig cfg;  // hann, log on
  std::vector<double> shifted(sig.begin() + cfg.hop, sig.end());
  shifted.resize(187, 0.0);
  const auto a = spectrogram(sig, cfg);
  const auto b = spectrogram(shifted, cfg);
  // Interior frames of the shifted signal equal the original's next frame.
  for (int f = 0; f + 1 < a.frames - cfg.window_len / cfg.hop; ++f) {
    for (int bin = 0; bin < a.bins; ++bin) {
      CHECK(b.at(f, bin) == doctest::Approx(a.at(f + 1, bin)).epsilon(1e-9));
    }
  }
}

TEST_CASE("output shape depends only on the config") {
  StftConfig cfg;
  RngStream rng(5);
  std::vector<double> sig(187);
  for (double& v : sig) v = rng.normal() * 100.0;
  const auto a = spectrogram(sig, cfg);
  const auto b = spectrogram(std::vector<double>(187, 3.5), cfg);
  CHECK(a.frames == b.frames);
  CHECK(a.bins == b.bins);
}

TEST_CASE("log scaling applies ln(1+m)") {
  std::vector<double> sig(187, 0.0);
  sig[10] = 1.0;
  auto lin_cfg = rect_cfg(32, 4, 32, false);
  auto log_cfg = rect_cfg(32, 4, 32, true);
  const auto lin = spectrogram(sig, lin_cfg);
  const auto log = spectrogram(sig, log_cfg);
  for (std::size_t i = 0; i < lin.values.size(); ++i) {
    CHECK(log.values[i] == doctest::Approx(std::log1p(lin.values[i])).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  StftConfig cfg;
  cfg.fft_len = 33;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = StftConfig{};
  cfg.hop = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = StftConfig{};
  cfg.window_len = 200;  // longer than the 187-sample segment
  cfg.fft_len = 256;
  std::vector<double> sig(187, 0.0);
  CHECK_THROWS_AS(spectrogram(sig, cfg), ConfigError);
}

TEST_CASE("standardize yields zero mean and unit variance") {
  RngStream rng(8);
  std::vector<double> sig(187);
  for (double& v : sig) v = rng.uniform(0.0, 1.0);
  auto spec = spectrogram(sig, StftConfig{});
  standardize(spec);
  double mean = 0;
  for (double v : spec.values) mean += v;
  mean /= static_cast<double>(spec.values.size());
  double var = 0;
  for (double v : spec.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(spec.values.size());
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
}
