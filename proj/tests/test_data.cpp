#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ecguq/data.hpp"
#include "ecguq/synth.hpp"

using namespace ecguq;

namespace {

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ecguq_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string make_csv(const std::string& name, const std::vector<std::string>& lines) {
  const std::string path = temp_path(name);
  std::ofstream out(path, std::ios::binary);
  for (const auto& l : lines) out << l << "\n";
  return path;
}

std::string row_of(double value, int label) {
  std::string row;
  for (int i = 0; i < kSegmentLength; ++i) {
    row += std::to_string(value);
    row += ',';
  }
  row += std::to_string(label);
  return row;
}

}  // namespace

TEST_CASE("load_csv parses rows and preserves order") {
  const auto path = make_csv("ok.csv", {row_of(0.25, 0), row_of(0.5, 1), row_of(0.75, 4)});
  const auto records = load_csv(path, DatasetMeta::mitbih());
  REQUIRE(records.size() == 3);
  CHECK(records[0].label == 0);
  CHECK(records[1].label == 1);
  CHECK(records[2].label == 4);
  CHECK(records[0].samples.size() == kSegmentLength);
  CHECK(records[1].samples[10] == doctest::Approx(0.5));
}

TEST_CASE("load_csv empty file yields empty sequence") {
  const auto path = make_csv("empty.csv", {});
  CHECK(load_csv(path, DatasetMeta::ptb()).empty());
}

TEST_CASE("load_csv rejects malformed input with the row number") {
  SUBCASE("wrong field count") {
    const auto path = make_csv("short.csv", {row_of(0.1, 0), "1.0,2.0,3.0"});
    CHECK_THROWS_WITH_AS(load_csv(path, DatasetMeta::ptb()), doctest::Contains("row 2"), LoadError);
  }
  SUBCASE("non-numeric field") {
    auto bad = row_of(0.1, 0);
    bad.replace(0, 3, "abc");
    const auto path = make_csv("nan.csv", {bad});
    CHECK_THROWS_WITH_AS(load_csv(path, DatasetMeta::ptb()), doctest::Contains("row 1"), LoadError);
  }
  SUBCASE("label out of range") {
    const auto path = make_csv("label.csv", {row_of(0.1, 7)});
    CHECK_THROWS_WITH_AS(load_csv(path, DatasetMeta::mitbih()), doctest::Contains("label 7"), LoadError);
  }
  SUBCASE("round-to-nearest label parsing") {
    std::string row;
    for (int i = 0; i < kSegmentLength; ++i) row += "0.5,";
    row += "2.9999";
    const auto path = make_csv("roundlabel.csv", {row});
    CHECK(load_csv(path, DatasetMeta::mitbih())[0].label == 3);
  }
}

TEST_CASE("load_csv accepts CRLF line endings") {
  const std::string path = temp_path("crlf.csv");
  {
    std::ofstream out(path, std::ios::binary);
    out << row_of(0.5, 1) << "\r\n" << row_of(0.25, 0) << "\r\n";
  }
  const auto records = load_csv(path, DatasetMeta::ptb());
  REQUIRE(records.size() == 2);
  CHECK(records[0].label == 1);
}

TEST_CASE("csv round-trip is bit-identical") {
  SynthConfig cfg;
  cfg.seed = 11;
  const auto records = synth_corpus(DatasetMeta::ptb(), 50, cfg);
  const auto path = temp_path("roundtrip.csv");
  save_csv(path, records);
  const auto reloaded = load_csv(path, DatasetMeta::ptb());
  REQUIRE(reloaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(reloaded[i].label == records[i].label);
    for (int j = 0; j < kSegmentLength; ++j) {
      // bit-exact, not approximate
      CHECK(reloaded[i].samples[static_cast<std::size_t>(j)] ==
            records[i].samples[static_cast<std::size_t>(j)]);
    }
  }
}

TEST_CASE("stratified split") {
  SynthConfig scfg;
  scfg.seed = 3;
  auto records = synth_corpus(DatasetMeta::mitbih(), 1000, scfg);
  SplitSpec spec{SplitSpec::Mode::kStratifiedRandom, 0.8, 42};

  SUBCASE("preserves class proportions within one record") {
    const auto result = split(records, spec);
    const auto h_all = class_histogram(records, 5);
    const auto h_train = class_histogram(result.train, 5);
    for (int c = 0; c < 5; ++c) {
      const double expected = 0.8 * static_cast<double>(h_all[static_cast<std::size_t>(c)]);
      CHECK(std::abs(static_cast<double>(h_train[static_cast<std::size_t>(c)]) - expected) <= 1.0);
    }
  }

  SUBCASE("train and test form the input multiset") {
    const auto result = split(records, spec);
    CHECK(result.train.size() + result.test.size() == records.size());
    // Order within each side is the original order, so a merge by label+first
    // sample must reproduce the multiset.
    std::vector<double> all, got;
    for (const auto& r : records) all.push_back(r.samples[0] + 1000.0 * r.label);
    for (const auto& r : result.train) got.push_back(r.samples[0] + 1000.0 * r.label);
    for (const auto& r : result.test) got.push_back(r.samples[0] + 1000.0 * r.label);
    std::sort(all.begin(), all.end());
    std::sort(got.begin(), got.end());
    CHECK(all == got);
  }

  SUBCASE("identical seeds give identical partitions") {
    const auto a = split(records, spec);
    const auto b = split(records, spec);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].samples[0] == b.train[i].samples[0]);
    }
  }

  SUBCASE("exact fraction on a single-class set") {
    std::vector<HeartbeatRecord> ten;
    for (int i = 0; i < 10; ++i) {
      ten.push_back(HeartbeatRecord{std::vector<double>(kSegmentLength, 0.1 * i), 0});
    }
    const auto result = split(ten, SplitSpec{SplitSpec::Mode::kStratifiedRandom, 0.8, 1});
    CHECK(result.train.size() == 8);
    CHECK(result.test.size() == 2);
  }

  SUBCASE("a class with fewer than 2 records fails") {
    std::vector<HeartbeatRecord> few;
    few.push_back(HeartbeatRecord{std::vector<double>(kSegmentLength, 0.0), 0});
    few.push_back(HeartbeatRecord{std::vector<double>(kSegmentLength, 0.0), 0});
    few.push_back(HeartbeatRecord{std::vector<double>(kSegmentLength, 0.0), 1});
    CHECK_THROWS_AS(split(few, spec), SplitError);
  }

  SUBCASE("bad fraction rejected") {
    CHECK_THROWS_AS(split(records, SplitSpec{SplitSpec::Mode::kStratifiedRandom, 1.0, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("pregiven split passes through unchanged") {
  SynthConfig scfg;
  scfg.seed = 5;
  auto train = synth_corpus(DatasetMeta::ptb(), 30, scfg);
  scfg.seed = 6;
  auto test = synth_corpus(DatasetMeta::ptb(), 10, scfg);
  const auto result = split_pregiven(train, test);
  CHECK(result.train.size() == 30);
  CHECK(result.test.size() == 10);
  CHECK(result.train[3].samples == train[3].samples);
}

TEST_CASE("batches") {
  SUBCASE("sizes 4,4,2 for 10 records at batch 4") {
    const auto batches = make_batches(10, 4, std::nullopt);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);
  }
  SUBCASE("oversized batch collapses to one") {
    const auto batches = make_batches(10, 16, std::nullopt);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].size() == 10);
  }
  SUBCASE("equal seeds give identical order, and each index appears once") {
    const auto a = make_batches(10, 4, 99);
    const auto b = make_batches(10, 4, 99);
    CHECK(a == b);
    std::vector<int> seen(10, 0);
    for (const auto& batch : a) {
      for (int i : batch) ++seen[static_cast<std::size_t>(i)];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
  SUBCASE("batch_size 0 rejected") {
    CHECK_THROWS_AS(make_batches(10, 0, std::nullopt), std::invalid_argument);
  }
}

TEST_CASE("inverse frequency weights favor rare classes") {
  SynthConfig scfg;
  scfg.seed = 9;
  const auto records = synth_corpus(DatasetMeta::mitbih(), 2000, scfg);
  const auto w = inverse_frequency_weights(records, 5);
  REQUIRE(w.size() == 5);
  CHECK(w[3] > w[0]);  // fusion beats are the rarest class in the mix
  double mean = 0;
  for (double v : w) mean += v;
  CHECK(mean / 5.0 == doctest::Approx(1.0));
}

TEST_CASE("normalize_minmax maps each record to [0,1]") {
  std::vector<HeartbeatRecord> recs{{std::vector<double>(kSegmentLength, 0.0), 0}};
  for (int i = 0; i < kSegmentLength; ++i) recs[0].samples[static_cast<std::size_t>(i)] = -5.0 + i * 0.1;
  normalize_minmax(recs);
  const auto [lo, hi] = std::minmax_element(recs[0].samples.begin(), recs[0].samples.end());
  CHECK(*lo == doctest::Approx(0.0));
  CHECK(*hi == doctest::Approx(1.0));
}
