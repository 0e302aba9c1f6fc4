#pragma once

#include <span>
#include <string>
#include <vector>

#include "ecguq/metrics.hpp"

namespace ecguq {

// One row of the published uncertainty-quantification result table. Counts
// are stored exactly as printed there (CU, IC, IU, CC); the printed CU and IU
// columns are transposed relative to the metric definitions, so the oracle
// swaps them back before recomputing (see swapped_confusion).
struct PublishedUqRow {
  std::string dataset;  // mitbih | ptb
  std::string model;    // lstm | cnn1d | transformer | uctecg
  std::string method;   // mcd | ensemble | emcd
  std::int64_t printed_cu = 0;
  std::int64_t printed_ic = 0;
  std::int64_t printed_iu = 0;
  std::int64_t printed_cc = 0;
  double uacc = 0.0;  // reported percentages
  double usen = 0.0;
  double uspe = 0.0;
  double upre = 0.0;

  UncertaintyConfusion swapped_confusion() const {
    return {printed_cc, printed_iu, printed_ic, printed_cu};
  }
};

// All 24 published rows (12 per corpus).
std::span<const PublishedUqRow> published_uq_rows();

std::int64_t expected_test_size(const std::string& dataset);  // 21892 / 2911

struct UqRowCheck {
  bool pass = false;
  bool count_sum_ok = false;
  double uacc = 0.0, usen = 0.0, uspe = 0.0, upre = 0.0;  // recomputed, percent, 2-dec rounded
  std::string detail;
};

// Recomputes the four ratios from the (swapped) counts and compares with the
// reported percentages at two-decimal rounding.
UqRowCheck check_published_row(const PublishedUqRow& row);

// CSV with header dataset,model,method,cu,ic,iu,cc,uacc,usen,uspe,upre.
std::vector<PublishedUqRow> load_uq_rows_csv(const std::string& path);

}  // namespace ecguq
