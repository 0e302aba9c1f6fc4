#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecguq/uq.hpp"

namespace ecguq {

struct ClassificationReport {
  struct PerClass {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
  };
  double accuracy = 0.0;
  // Support-weighted aggregates.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<PerClass> per_class;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]

  nlohmann::json to_json() const;
};

ClassificationReport classification_report(std::span<const int> predicted, std::span<const int> labels,
                                           int num_classes);

// The 2x2 correctness-by-confidence partition.
struct UncertaintyConfusion {
  std::int64_t cc = 0;  // correct and certain
  std::int64_t cu = 0;  // correct and uncertain
  std::int64_t ic = 0;  // incorrect and certain
  std::int64_t iu = 0;  // incorrect and uncertain
  std::int64_t total() const { return cc + cu + ic + iu; }
};

struct ThresholdPolicy {
  enum class Mode { kFixed, kMaximizeUaccOnValidation };
  Mode mode = Mode::kFixed;
  double value = 0.5;               // fixed mode: normalized-entropy cutoff
  double validation_fraction = 0.2; // sweep mode: leading slice used for the sweep
  int grid = 101;                   // sweep points on [0,1]
};

struct ThresholdResult {
  UncertaintyConfusion confusion;
  double threshold = 0.0;
};

// certain <=> entropy_normalized <= threshold. Sweep mode picks the grid
// threshold maximizing UAcc on the leading validation slice (ties to the
// lower threshold) and tabulates the remaining predictions with it; fixed
// mode tabulates everything.
ThresholdResult apply_threshold(std::span<const UqPrediction> preds, std::span<const int> labels,
                                const ThresholdPolicy& policy);

UncertaintyConfusion tabulate_confusion(std::span<const UqPrediction> preds, std::span<const int> labels,
                                        double threshold);

// Stamp the certain flag onto predictions once a threshold is chosen.
void mark_certainty(std::span<UqPrediction> preds, double threshold);

struct UncertaintyMetrics {
  double uacc = 0.0;                 // (CC+IU)/total
  std::optional<double> usen;        // IU/(IC+IU)
  std::optional<double> uspe;        // CC/(CC+CU)
  std::optional<double> upre;        // IU/(CU+IU)
};

// Ratios with zero denominators are reported as absent, never as zero.
// Throws std::invalid_argument on an all-zero confusion.
UncertaintyMetrics uncertainty_metrics(const UncertaintyConfusion& conf);

// UAcc within each true-class slice; absent for classes with no support.
std::vector<std::optional<double>> per_class_uacc(std::span<const UqPrediction> preds,
                                                  std::span<const int> labels, double threshold,
                                                  int num_classes);

struct EntropyDensity {
  std::vector<double> bin_center;
  std::vector<double> density_correct;    // integrates to 1 when any correct
  std::vector<double> density_incorrect;  // integrates to 1 when any incorrect
  bool has_correct = false;
  bool has_incorrect = false;
};

// Normalized histograms of entropy_normalized for correct vs incorrect
// predictions over [0,1]; the raw material of the density-plot figure.
EntropyDensity entropy_density_export(std::span<const UqPrediction> preds, std::span<const int> labels,
                                      int bins);

void write_density_csv(const std::string& path, const EntropyDensity& density);

}  // namespace ecguq
