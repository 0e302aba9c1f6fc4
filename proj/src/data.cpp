#include "ecguq/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ecguq {

DatasetMeta DatasetMeta::mitbih() {
  return {"mitbih", 5, kSamplingRateHz, {"N", "S", "V", "F", "Q"}};
}

DatasetMeta DatasetMeta::ptb() {
  return {"ptb", 2, kSamplingRateHz, {"Normal", "Abnormal"}};
}

DatasetMeta DatasetMeta::by_name(const std::string& name) {
  if (name == "mitbih") return mitbih();
  if (name == "ptb") return ptb();
  throw ConfigError("unknown dataset '" + name + "' (expected mitbih or ptb)");
}

namespace {

double parse_field(const char* begin, const char* end, std::size_t row, std::size_t col) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw LoadError("row " + std::to_string(row) + ": non-numeric field " + std::to_string(col + 1));
  }
  return v;
}

}  // namespace

std::vector<HeartbeatRecord> load_csv(const std::string& path, const DatasetMeta& meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);

  std::vector<HeartbeatRecord> records;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();  // CRLF input
    if (line.empty()) {
      continue;  // ignore trailing blank line
    }
    HeartbeatRecord rec;
    rec.samples.reserve(kSegmentLength);
    const char* p = line.data();
    const char* line_end = line.data() + line.size();
    std::size_t col = 0;
    while (true) {
      const char* field_end = std::find(p, line_end, ',');
      double v = parse_field(p, field_end, row, col);
      if (col < kSegmentLength) {
        if (!std::isfinite(v)) {
          throw LoadError("row " + std::to_string(row) + ": non-finite sample value");
        }
        rec.samples.push_back(v);
      } else {
        long lbl = std::lround(v);
        if (lbl < 0 || lbl >= meta.num_classes) {
          throw LoadError("row " + std::to_string(row) + ": label " + std::to_string(lbl) +
                          " out of range for " + meta.name + " (C=" + std::to_string(meta.num_classes) + ")");
        }
        rec.label = static_cast<int>(lbl);
      }
      ++col;
      if (field_end == line_end) break;
      p = field_end + 1;
    }
    if (col != kSegmentLength + 1) {
      throw LoadError("row " + std::to_string(row) + ": expected " + std::to_string(kSegmentLength + 1) +
                      " fields, got " + std::to_string(col));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_csv(const std::string& path, const std::vector<HeartbeatRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  std::string line;
  char buf[64];
  for (const auto& rec : records) {
    line.clear();
    for (double v : rec.samples) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
      (void)ec;
      line.append(buf, ptr);
      line.push_back(',');
    }
    line.append(std::to_string(rec.label));
    line.push_back('\n');
    out << line;
  }
  if (!out) throw LoadError("write failed for " + path);
}

SplitResult split(const std::vector<HeartbeatRecord>& records, const SplitSpec& spec) {
  if (records.empty()) throw std::invalid_argument("split: empty record set");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in (0,1)");
  }
  if (spec.mode == SplitSpec::Mode::kPregivenFiles) {
    throw std::invalid_argument("split: pregiven-files mode takes two files, use split_pregiven");
  }

  int max_label = 0;
  for (const auto& r : records) max_label = std::max(max_label, r.label);

  std::vector<std::vector<std::int64_t>> by_class(static_cast<std::size_t>(max_label) + 1);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(records.size()); ++i) {
    by_class[static_cast<std::size_t>(records[static_cast<std::size_t>(i)].label)].push_back(i);
  }

  std::vector<char> in_train(records.size(), 0);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw SplitError("class " + std::to_string(c) + " has fewer than 2 records");
    }
    RngStream rng(mix_seed({spec.seed, static_cast<std::uint64_t>(c)}));
    // Fisher-Yates over this class's indices.
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
      std::swap(idx[i], idx[j]);
    }
    auto take = static_cast<std::int64_t>(std::llround(spec.train_fraction * static_cast<double>(idx.size())));
    take = std::clamp<std::int64_t>(take, 1, static_cast<std::int64_t>(idx.size()) - 1);
    for (std::int64_t i = 0; i < take; ++i) in_train[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
  }

  SplitResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_train[i] ? out.train : out.test).push_back(records[i]);
  }
  return out;
}

SplitResult split_pregiven(std::vector<HeartbeatRecord> train, std::vector<HeartbeatRecord> test) {
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<std::int32_t>> make_batches(std::int64_t n, std::int64_t batch_size,
                                                    std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
  if (n < 0) throw std::invalid_argument("batches: negative count");

  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    RngStream rng(*shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
      std::swap(order[i - 1], order[j]);
    }
  }

  std::vector<std::vector<std::int32_t>> batches;
  for (std::int64_t start = 0; start < n; start += batch_size) {
    auto end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

void normalize_minmax(std::vector<HeartbeatRecord>& records) {
  for (auto& rec : records) {
    auto [lo_it, hi_it] = std::minmax_element(rec.samples.begin(), rec.samples.end());
    double lo = *lo_it, hi = *hi_it;
    double span = hi - lo;
    if (span <= 0.0) {
      std::fill(rec.samples.begin(), rec.samples.end(), 0.0);
      continue;
    }
    for (double& v : rec.samples) v = (v - lo) / span;
  }
}

std::vector<double> inverse_frequency_weights(const std::vector<HeartbeatRecord>& records, int num_classes) {
  auto hist = class_histogram(records, num_classes);
  std::vector<double> w(static_cast<std::size_t>(num_classes), 0.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (hist[static_cast<std::size_t>(c)] > 0) {
      w[static_cast<std::size_t>(c)] = static_cast<double>(records.size()) / static_cast<double>(hist[static_cast<std::size_t>(c)]);
      sum += w[static_cast<std::size_t>(c)];
      ++present;
    }
  }
  if (present == 0) throw std::invalid_argument("class weights: empty record set");
  for (double& v : w) v *= static_cast<double>(present) / sum;  // mean weight 1 over present classes
  return w;
}

Tensor to_matrix(const std::vector<HeartbeatRecord>& records) {
  Tensor x({static_cast<std::int64_t>(records.size()), kSegmentLength});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = records[i].samples;
    std::copy(s.begin(), s.end(), x.data() + static_cast<std::int64_t>(i) * kSegmentLength);
  }
  return x;
}

std::vector<int> to_labels(const std::vector<HeartbeatRecord>& records) {
  std::vector<int> y(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) y[i] = records[i].label;
  return y;
}

std::vector<std::int64_t> class_histogram(const std::vector<HeartbeatRecord>& records, int num_classes) {
  std::vector<std::int64_t> hist(static_cast<std::size_t>(num_classes), 0);
  for (const auto& r : records) {
    if (r.label >= 0 && r.label < num_classes) ++hist[static_cast<std::size_t>(r.label)];
  }
  return hist;
}

}  // namespace ecguq
