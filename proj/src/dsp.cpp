#include "ecguq/dsp.hpp"

#include <cmath>
#include <complex>
#include <fstream>

namespace ecguq {

namespace {

bool is_pow2(int n) {
  return n > 0 && (n & (n - 1)) == 0;
}

// In-place iterative radix-2 Cooley-Tukey, decimation in time.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

}  // namespace

void StftConfig::validate() const {
  if (hop <= 0 || window_len < hop || fft_len < window_len) {
    throw ConfigError("stft: need 0 < hop <= window_len <= fft_len");
  }
  if (!is_pow2(fft_len)) {
    throw ConfigError("stft: fft_len must be a power of two, got " + std::to_string(fft_len));
  }
}

std::vector<double> window_coefficients(StftConfig::Window fn, int len) {
  std::vector<double> w(static_cast<std::size_t>(len), 1.0);
  if (len == 1) return w;
  for (int n = 0; n < len; ++n) {
    double phase = 2.0 * M_PI * n / (len - 1);
    switch (fn) {
      case StftConfig::Window::kHann:
        w[static_cast<std::size_t>(n)] = 0.5 * (1.0 - std::cos(phase));
        break;
      case StftConfig::Window::kHamming:
        w[static_cast<std::size_t>(n)] = 0.54 - 0.46 * std::cos(phase);
        break;
      case StftConfig::Window::kRectangular:
        break;
    }
  }
  return w;
}

Spectrogram spectrogram(std::span<const double> signal, const StftConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(signal.size());
  if (cfg.window_len > n) {
    throw ConfigError("stft: window_len " + std::to_string(cfg.window_len) + " exceeds signal length " +
                      std::to_string(n));
  }

  // Trailing samples shorter than one window are dropped.
  Spectrogram out;
  out.frames = cfg.num_frames(n);
  out.bins = cfg.num_bins();
  out.values.assign(static_cast<std::size_t>(out.frames) * static_cast<std::size_t>(out.bins), 0.0);

  const auto window = window_coefficients(cfg.window_fn, cfg.window_len);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_len));

  for (int f = 0; f < out.frames; ++f) {
    const int start = f * cfg.hop;
    for (int i = 0; i < cfg.window_len; ++i) {
      buf[static_cast<std::size_t>(i)] = signal[static_cast<std::size_t>(start + i)] * window[static_cast<std::size_t>(i)];
    }
    for (int i = cfg.window_len; i < cfg.fft_len; ++i) buf[static_cast<std::size_t>(i)] = 0.0;
    fft(buf);
    for (int b = 0; b < out.bins; ++b) {
      double mag = std::abs(buf[static_cast<std::size_t>(b)]);
      out.at(f, b) = cfg.log_scale ? std::log1p(mag) : mag;
    }
  }
  return out;
}

Spectrogram spectrogram(const HeartbeatRecord& record, const StftConfig& cfg) {
  return spectrogram(std::span<const double>(record.samples), cfg);
}

void standardize(Spectrogram& spec) {
  const double n = static_cast<double>(spec.values.size());
  if (n == 0) return;
  double mean = 0.0;
  for (double v : spec.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : spec.values) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + 1e-8);
  for (double& v : spec.values) v = (v - mean) * inv;
}

void write_spectrogram_csv(const std::string& path, const Spectrogram& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  for (int f = 0; f < spec.frames; ++f) {
    for (int b = 0; b < spec.bins; ++b) {
      if (b) out << ',';
      out << spec.at(f, b);
    }
    out << '\n';
  }
}

}  // namespace ecguq
