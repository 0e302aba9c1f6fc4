#include "ecguq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace ecguq {

namespace {

struct Bump {
  double center;
  double width;
  double amp;
};

void add_bump(std::vector<double>& sig, const Bump& b) {
  for (std::size_t t = 0; t < sig.size(); ++t) {
    const double d = (static_cast<double>(t) - b.center) / b.width;
    sig[t] += b.amp * std::exp(-0.5 * d * d);
  }
}

// One beat morphology as a list of bumps; `variant` picks sub-morphologies
// inside the broad classes.
std::vector<Bump> morphology(const std::string& dataset, int label, double variant) {
  std::vector<Bump> bumps;
  const bool binary = dataset == "ptb";
  // Shared skeleton: R complex near the segment start, T wave, and the next
  // beat's R partway through (the corpus beats include the following onset).
  if (binary ? label == 0 : label == 0) {
    bumps = {{8, 2.0, 1.0}, {45, 10.0, 0.30}, {98, 6.0, 0.15}, {112, 2.2, 0.90}};
    return bumps;
  }
  if (binary) {
    // Abnormal: three recognizable sub-morphologies.
    if (variant < 0.34) {
      bumps = {{8, 6.0, 0.95}, {48, 12.0, -0.28}, {118, 6.5, 0.80}};           // wide QRS, inverted T
    } else if (variant < 0.67) {
      bumps = {{8, 2.0, 1.0}, {30, 14.0, 0.26}, {50, 10.0, 0.34}, {112, 2.2, 0.88}};  // elevated ST ramp
    } else {
      bumps = {{8, 2.5, 0.85}, {40, 9.0, -0.22}, {88, 2.4, 0.85}};             // early next beat, flipped T
    }
    return bumps;
  }
  switch (label) {
    case 1:  // supraventricular: premature narrow beat, absent P
      bumps = {{8, 1.8, 0.95}, {42, 9.0, 0.24}, {86, 2.0, 0.92}};
      break;
    case 2:  // ventricular: wide QRS, inverted T
      bumps = {{8, 6.0, 0.95}, {50, 12.0, -0.30}, {120, 6.0, 0.75}};
      break;
    case 3:  // fusion: intermediate width and damped T
      bumps = {{8, 4.0, 0.80}, {46, 10.0, 0.15}, {108, 3.5, 0.78}};
      break;
    case 4:  // paced: broad double hump
      bumps = {{8, 7.5, 0.85}, {22, 5.0, 0.45}, {52, 11.0, 0.32}, {116, 7.0, 0.70}};
      break;
    default:
      throw std::invalid_argument("synth: label out of range");
  }
  return bumps;
}

std::vector<double> render(const std::string& dataset, int label, RngStream& rng, double noise_sigma) {
  const double variant = rng.uniform();
  auto bumps = morphology(dataset, label, variant);

  const double shift = rng.uniform(-3.0, 3.0);
  std::vector<double> sig(kSegmentLength, 0.0);
  for (auto& b : bumps) {
    b.center += shift + rng.uniform(-1.5, 1.5);
    b.width *= rng.uniform(0.9, 1.1);
    b.amp *= rng.uniform(0.85, 1.15);
    add_bump(sig, b);
  }
  // Slow baseline wander plus sensor noise.
  const double wf = rng.uniform(0.5, 1.5) * 2.0 * M_PI / kSegmentLength;
  const double wp = rng.uniform(0.0, 2.0 * M_PI);
  const double wa = rng.uniform(0.0, 0.06);
  for (std::size_t t = 0; t < sig.size(); ++t) {
    sig[t] += wa * std::sin(wf * static_cast<double>(t) + wp) + noise_sigma * rng.normal();
  }
  return sig;
}

void minmax_scale(std::vector<double>& sig) {
  const auto [lo_it, hi_it] = std::minmax_element(sig.begin(), sig.end());
  const double lo = *lo_it, hi = *hi_it;
  const double span = hi - lo;
  if (span <= 0.0) {
    std::fill(sig.begin(), sig.end(), 0.0);
    return;
  }
  for (double& v : sig) v = (v - lo) / span;
}

std::vector<double> class_mix(const DatasetMeta& meta) {
  if (meta.name == "mitbih") return {0.828, 0.025, 0.066, 0.007, 0.074};
  if (meta.name == "ptb") return {0.278, 0.722};
  throw ConfigError("synth: unknown dataset '" + meta.name + "'");
}

// Largest-remainder apportionment so class counts sum to n exactly.
std::vector<std::int64_t> apportion(const std::vector<double>& mix, std::int64_t n) {
  std::vector<std::int64_t> counts(mix.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::int64_t assigned = 0;
  for (std::size_t c = 0; c < mix.size(); ++c) {
    const double exact = mix[c] * static_cast<double>(n);
    counts[c] = static_cast<std::int64_t>(exact);
    assigned += counts[c];
    rema.emplace_back(exact - std::floor(exact), c);
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::int64_t i = 0; i < n - assigned; ++i) ++counts[rema[static_cast<std::size_t>(i)].second];
  return counts;
}

}  // namespace

HeartbeatRecord synth_record(const DatasetMeta& meta, int label, std::uint64_t record_seed,
                             const SynthConfig& cfg) {
  if (label < 0 || label >= meta.num_classes) throw std::invalid_argument("synth: label out of range");
  RngStream rng(record_seed);
  const bool borderline = rng.uniform() < cfg.borderline_fraction;

  std::vector<double> sig;
  if (!borderline || meta.num_classes < 2) {
    sig = render(meta.name, label, rng, cfg.noise_sigma);
  } else {
    // Ambiguous beat: blend this class with a neighbor, biased toward the label.
    int other = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(meta.num_classes - 1)));
    if (other >= label) ++other;
    const double lam = rng.uniform(0.5, 0.65);
    auto a = render(meta.name, label, rng, cfg.noise_sigma);
    auto b = render(meta.name, other, rng, cfg.noise_sigma);
    sig.resize(a.size());
    for (std::size_t i = 0; i < sig.size(); ++i) sig[i] = lam * a[i] + (1.0 - lam) * b[i];
  }
  minmax_scale(sig);
  return HeartbeatRecord{std::move(sig), label};
}

std::vector<HeartbeatRecord> synth_corpus(const DatasetMeta& meta, std::int64_t n, const SynthConfig& cfg) {
  if (n < 0) throw std::invalid_argument("synth: negative count");
  const auto counts = apportion(class_mix(meta), n);

  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), static_cast<int>(c));
  }
  RngStream shuffle_rng(mix_seed({cfg.seed, 0x7368ULL}));
  for (std::size_t i = labels.size(); i > 1; --i) {
    std::swap(labels[i - 1], labels[static_cast<std::size_t>(shuffle_rng.uniform_int(i))]);
  }

  std::vector<HeartbeatRecord> records(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t i0, std::int64_t i1) {
    for (std::int64_t i = i0; i < i1; ++i) {
      records[static_cast<std::size_t>(i)] = synth_record(
          meta, labels[static_cast<std::size_t>(i)], mix_seed({cfg.seed, static_cast<std::uint64_t>(i)}), cfg);
    }
  });
  return records;
}

void write_synth_corpus_files(const std::string& dir, const DatasetMeta& meta, std::int64_t train_rows,
                              std::int64_t test_rows, const SynthConfig& cfg) {
  std::filesystem::create_directories(dir);
  SynthConfig train_cfg = cfg;
  train_cfg.seed = mix_seed({cfg.seed, 0x7472ULL});
  SynthConfig test_cfg = cfg;
  test_cfg.seed = mix_seed({cfg.seed, 0x7465ULL});
  save_csv(dir + "/" + meta.name + "_train.csv", synth_corpus(meta, train_rows, train_cfg));
  save_csv(dir + "/" + meta.name + "_test.csv", synth_corpus(meta, test_rows, test_cfg));
}

}  // namespace ecguq
