#include "ecguq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ecguq {

nlohmann::json ClassificationReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& pc : per_class) {
    per.push_back({{"precision", pc.precision}, {"recall", pc.recall}, {"f1", pc.f1}, {"support", pc.support}});
  }
  return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall},
          {"f1", f1},             {"per_class", per},       {"confusion_matrix", confusion}};
}

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> labels,
                                           int num_classes) {
  if (predicted.empty() || predicted.size() != labels.size()) {
    throw std::invalid_argument("classification_report: empty or mismatched inputs");
  }
  ClassificationReport rep;
  rep.confusion.assign(static_cast<std::size_t>(num_classes),
                       std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predicted[i];
    if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
      throw std::invalid_argument("classification_report: class index out of range");
    }
    ++rep.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }

  const auto total = static_cast<double>(labels.size());
  std::int64_t trace = 0;
  rep.per_class.resize(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    std::int64_t tp = rep.confusion[cu][cu];
    std::int64_t row = 0, col = 0;
    for (int k = 0; k < num_classes; ++k) {
      row += rep.confusion[cu][static_cast<std::size_t>(k)];
      col += rep.confusion[static_cast<std::size_t>(k)][cu];
    }
    trace += tp;
    auto& pc = rep.per_class[cu];
    pc.support = row;
    pc.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    pc.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    pc.f1 = (pc.precision + pc.recall) > 0.0 ? 2.0 * pc.precision * pc.recall / (pc.precision + pc.recall) : 0.0;

    const double w = static_cast<double>(row) / total;
    rep.precision += w * pc.precision;
    rep.recall += w * pc.recall;
    rep.f1 += w * pc.f1;
  }
  rep.accuracy = static_cast<double>(trace) / total;
  return rep;
}

void mark_certainty(std::span<UqPrediction> preds, double threshold) {
  for (auto& p : preds) p.certain = p.entropy_normalized <= threshold;
}

UncertaintyConfusion tabulate_confusion(std::span<const UqPrediction> preds, std::span<const int> labels,
                                        double threshold) {
  UncertaintyConfusion conf;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool correct = preds[i].predicted_class == labels[i];
    const bool certain = preds[i].entropy_normalized <= threshold;
    if (correct) {
      ++(certain ? conf.cc : conf.cu);
    } else {
      ++(certain ? conf.ic : conf.iu);
    }
  }
  return conf;
}

ThresholdResult apply_threshold(std::span<const UqPrediction> preds, std::span<const int> labels,
                                const ThresholdPolicy& policy) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw std::invalid_argument("apply_threshold: empty or mismatched inputs");
  }
  if (policy.mode == ThresholdPolicy::Mode::kFixed) {
    if (!(policy.value >= 0.0 && policy.value <= 1.0)) {
      throw std::invalid_argument("apply_threshold: threshold must be in [0,1]");
    }
    return {tabulate_confusion(preds, labels, policy.value), policy.value};
  }

  if (policy.grid < 2) throw std::invalid_argument("apply_threshold: sweep grid needs >= 2 points");
  if (preds.size() < 2) throw std::invalid_argument("apply_threshold: sweep needs >= 2 predictions");
  auto val_n = static_cast<std::size_t>(
      std::llround(policy.validation_fraction * static_cast<double>(preds.size())));
  val_n = std::clamp<std::size_t>(val_n, 1, preds.size() - 1);

  const auto val_preds = preds.subspan(0, val_n);
  const auto val_labels = labels.subspan(0, val_n);
  double best_threshold = 0.0;
  double best_uacc = -1.0;
  for (int g = 0; g < policy.grid; ++g) {
    const double th = static_cast<double>(g) / static_cast<double>(policy.grid - 1);
    const auto conf = tabulate_confusion(val_preds, val_labels, th);
    const double uacc = static_cast<double>(conf.cc + conf.iu) / static_cast<double>(conf.total());
    if (uacc > best_uacc) {  // strict: ties keep the lower threshold
      best_uacc = uacc;
      best_threshold = th;
    }
  }
  return {tabulate_confusion(preds.subspan(val_n), labels.subspan(val_n), best_threshold), best_threshold};
}

UncertaintyMetrics uncertainty_metrics(const UncertaintyConfusion& conf) {
  if (conf.total() <= 0) throw std::invalid_argument("uncertainty_metrics: empty confusion");
  UncertaintyMetrics m;
  m.uacc = static_cast<double>(conf.cc + conf.iu) / static_cast<double>(conf.total());
  if (conf.ic + conf.iu > 0) m.usen = static_cast<double>(conf.iu) / static_cast<double>(conf.ic + conf.iu);
  if (conf.cc + conf.cu > 0) m.uspe = static_cast<double>(conf.cc) / static_cast<double>(conf.cc + conf.cu);
  if (conf.cu + conf.iu > 0) m.upre = static_cast<double>(conf.iu) / static_cast<double>(conf.cu + conf.iu);
  return m;
}

std::vector<std::optional<double>> per_class_uacc(std::span<const UqPrediction> preds,
                                                  std::span<const int> labels, double threshold,
                                                  int num_classes) {
  std::vector<std::int64_t> good(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> support(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) throw std::invalid_argument("per_class_uacc: label out of range");
    const bool correct = preds[i].predicted_class == y;
    const bool certain = preds[i].entropy_normalized <= threshold;
    ++support[static_cast<std::size_t>(y)];
    if (correct == certain) ++good[static_cast<std::size_t>(y)];  // CC or IU
  }
  std::vector<std::optional<double>> out(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    if (support[cu] > 0) out[cu] = static_cast<double>(good[cu]) / static_cast<double>(support[cu]);
  }
  return out;
}

EntropyDensity entropy_density_export(std::span<const UqPrediction> preds, std::span<const int> labels,
                                      int bins) {
  if (bins < 2) throw std::invalid_argument("entropy_density_export: bins must be >= 2");
  if (preds.size() != labels.size()) {
    throw std::invalid_argument("entropy_density_export: prediction/label count mismatch");
  }
  EntropyDensity d;
  d.bin_center.resize(static_cast<std::size_t>(bins));
  d.density_correct.assign(static_cast<std::size_t>(bins), 0.0);
  d.density_incorrect.assign(static_cast<std::size_t>(bins), 0.0);
  const double width = 1.0 / static_cast<double>(bins);
  for (int b = 0; b < bins; ++b) d.bin_center[static_cast<std::size_t>(b)] = (b + 0.5) * width;

  std::int64_t n_correct = 0, n_incorrect = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = std::clamp(preds[i].entropy_normalized, 0.0, 1.0);
    auto bin = static_cast<std::size_t>(std::min<std::int64_t>(static_cast<std::int64_t>(e / width), bins - 1));
    if (preds[i].predicted_class == labels[i]) {
      d.density_correct[bin] += 1.0;
      ++n_correct;
    } else {
      d.density_incorrect[bin] += 1.0;
      ++n_incorrect;
    }
  }
  d.has_correct = n_correct > 0;
  d.has_incorrect = n_incorrect > 0;
  if (d.has_correct) {
    for (double& v : d.density_correct) v /= static_cast<double>(n_correct) * width;
  }
  if (d.has_incorrect) {
    for (double& v : d.density_incorrect) v /= static_cast<double>(n_incorrect) * width;
  }
  return d;
}

void write_density_csv(const std::string& path, const EntropyDensity& density) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open " + path + " for writing");
  out << "bin_center,density_correct,density_incorrect\n";
  char buf[64];
  for (std::size_t i = 0; i < density.bin_center.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g", density.bin_center[i], density.density_correct[i],
                  density.density_incorrect[i]);
    out << buf << '\n';
  }
  if (!out) throw LoadError("write failed for " + path);
}

}  // namespace ecguq
