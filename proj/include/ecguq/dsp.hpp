#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecguq/common.hpp"
#include "ecguq/data.hpp"

namespace ecguq {

struct StftConfig {
  int window_len = 32;
  int hop = 4;
  int fft_len = 32;  // power of two, >= window_len
  enum class Window { kHann, kHamming, kRectangular };
  Window window_fn = Window::kHann;
  bool log_scale = true;  // ln(1 + magnitude)

  void validate() const;
  int num_bins() const { return fft_len / 2 + 1; }
  int num_frames(int signal_len) const { return (signal_len - window_len) / hop + 1; }
};

// Time-frequency magnitude matrix: frames x one-sided bins. Magnitudes are
// unnormalized DFT moduli |X[k]|; log_scale stores ln(1 + |X[k]|) instead.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> values;  // row-major frames x bins

  double& at(int f, int b) { return values[static_cast<std::size_t>(f) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(b)]; }
  double at(int f, int b) const { return values[static_cast<std::size_t>(f) * static_cast<std::size_t>(bins) + static_cast<std::size_t>(b)]; }
};

Spectrogram spectrogram(std::span<const double> signal, const StftConfig& cfg);
Spectrogram spectrogram(const HeartbeatRecord& record, const StftConfig& cfg);

// Zero-mean, unit-variance over all cells (epsilon 1e-8); applied before the
// spectrogram is fed to a model.
void standardize(Spectrogram& spec);

// One CSV per spectrogram: frames rows x bins columns.
void write_spectrogram_csv(const std::string& path, const Spectrogram& spec);

std::vector<double> window_coefficients(StftConfig::Window fn, int len);

}  // namespace ecguq
