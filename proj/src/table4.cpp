#include "ecguq/table4.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ecguq {

namespace {

const std::array<PublishedUqRow, 24> kRows = {{
    {"mitbih", "lstm", "mcd", 998, 926, 2719, 17249, 83.35, 51.87, 86.38, 26.85},
    {"mitbih", "lstm", "ensemble", 315, 142, 1862, 19573, 90.85, 68.93, 91.31, 14.47},
    {"mitbih", "lstm", "emcd", 329, 128, 2012, 19423, 90.22, 71.99, 90.61, 14.05},
    {"mitbih", "cnn1d", "mcd", 439, 205, 1139, 20109, 93.86, 68.17, 94.64, 27.82},
    {"mitbih", "cnn1d", "ensemble", 190, 267, 293, 21142, 97.44, 41.58, 98.63, 39.34},
    {"mitbih", "cnn1d", "emcd", 434, 224, 870, 20364, 95.0, 65.96, 95.9, 33.28},
    {"mitbih", "transformer", "mcd", 125, 205, 273, 21289, 97.82, 37.88, 98.73, 31.41},
    {"mitbih", "transformer", "ensemble", 88, 205, 151, 21448, 98.37, 30.03, 99.3, 36.82},
    {"mitbih", "transformer", "emcd", 113, 181, 219, 21379, 98.17, 38.44, 98.99, 34.04},
    {"mitbih", "uctecg", "mcd", 71, 237, 119, 21465, 98.37, 23.05, 99.45, 37.37},
    {"mitbih", "uctecg", "ensemble", 110, 186, 141, 21455, 98.51, 37.16, 99.35, 43.82},
    {"mitbih", "uctecg", "emcd", 120, 178, 168, 21426, 98.42, 40.27, 99.22, 41.67},
    {"ptb", "lstm", "mcd", 417, 206, 739, 1549, 67.54, 66.93, 67.7, 36.07},
    {"ptb", "lstm", "ensemble", 344, 142, 960, 1465, 62.14, 70.78, 60.41, 26.38},
    {"ptb", "lstm", "emcd", 345, 140, 965, 1461, 62.04, 71.13, 60.22, 26.34},
    {"ptb", "cnn1d", "mcd", 29, 26, 84, 2772, 96.22, 52.73, 97.06, 25.66},
    {"ptb", "cnn1d", "ensemble", 11, 23, 46, 2831, 97.63, 32.35, 98.4, 19.3},
    {"ptb", "cnn1d", "emcd", 16, 22, 45, 2828, 97.7, 42.11, 98.43, 26.23},
    {"ptb", "transformer", "mcd", 22, 34, 29, 2826, 97.84, 39.29, 98.98, 43.14},
    {"ptb", "transformer", "ensemble", 18, 25, 37, 2831, 97.87, 41.86, 98.71, 32.73},
    {"ptb", "transformer", "emcd", 20, 22, 42, 2827, 97.8, 47.62, 98.54, 32.26},
    {"ptb", "uctecg", "mcd", 8, 19, 26, 2858, 98.45, 29.63, 99.1, 23.53},
    {"ptb", "uctecg", "ensemble", 9, 16, 11, 2875, 99.07, 36.0, 99.62, 45.0},
    {"ptb", "uctecg", "emcd", 11, 16, 9, 2875, 99.14, 40.74, 99.69, 55.0},
}};

double round2(double pct) {
  return std::round(pct * 100.0) / 100.0;
}

bool match2(double recomputed_pct, double reported_pct) {
  return std::abs(round2(recomputed_pct) - round2(reported_pct)) < 1e-6;
}

}  // namespace

std::span<const PublishedUqRow> published_uq_rows() {
  return {kRows.data(), kRows.size()};
}

std::int64_t expected_test_size(const std::string& dataset) {
  if (dataset == "mitbih") return 21892;
  if (dataset == "ptb") return 2911;
  throw ConfigError("unknown dataset '" + dataset + "'");
}

UqRowCheck check_published_row(const PublishedUqRow& row) {
  UqRowCheck out;
  const auto conf = row.swapped_confusion();
  out.count_sum_ok = conf.total() == expected_test_size(row.dataset);

  const auto m = uncertainty_metrics(conf);
  out.uacc = round2(100.0 * m.uacc);
  out.usen = m.usen ? round2(100.0 * *m.usen) : std::nan("");
  out.uspe = m.uspe ? round2(100.0 * *m.uspe) : std::nan("");
  out.upre = m.upre ? round2(100.0 * *m.upre) : std::nan("");

  const bool metrics_ok = m.usen && m.uspe && m.upre && match2(100.0 * m.uacc, row.uacc) &&
                          match2(100.0 * *m.usen, row.usen) && match2(100.0 * *m.uspe, row.uspe) &&
                          match2(100.0 * *m.upre, row.upre);
  out.pass = metrics_ok && out.count_sum_ok;

  std::ostringstream os;
  os << row.dataset << '/' << row.model << '/' << row.method;
  if (!out.count_sum_ok) {
    os << " count sum " << conf.total() << " != " << expected_test_size(row.dataset);
  }
  if (!metrics_ok) {
    os << " recomputed " << out.uacc << '/' << out.usen << '/' << out.uspe << '/' << out.upre << " reported "
       << row.uacc << '/' << row.usen << '/' << row.uspe << '/' << row.upre;
  }
  out.detail = os.str();
  return out;
}

std::vector<PublishedUqRow> load_uq_rows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::vector<PublishedUqRow> rows;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("dataset,", 0) == 0) continue;  // header
    }
    std::istringstream ss(line);
    PublishedUqRow row;
    std::string field;
    try {
      std::getline(ss, row.dataset, ',');
      std::getline(ss, row.model, ',');
      std::getline(ss, row.method, ',');
      std::getline(ss, field, ',');
      row.printed_cu = std::stoll(field);
      std::getline(ss, field, ',');
      row.printed_ic = std::stoll(field);
      std::getline(ss, field, ',');
      row.printed_iu = std::stoll(field);
      std::getline(ss, field, ',');
      row.printed_cc = std::stoll(field);
      std::getline(ss, field, ',');
      row.uacc = std::stod(field);
      std::getline(ss, field, ',');
      row.usen = std::stod(field);
      std::getline(ss, field, ',');
      row.uspe = std::stod(field);
      if (!std::getline(ss, field, ',')) throw std::invalid_argument("short row");
      row.upre = std::stod(field);
    } catch (const std::exception&) {
      throw LoadError("row " + std::to_string(lineno) + ": malformed uq-table row");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ecguq
