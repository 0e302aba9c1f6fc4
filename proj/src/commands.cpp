#include "ecguq/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace ecguq {

namespace fs = std::filesystem;

void RunConfig::validate() const {
  DatasetMeta::by_name(dataset);
  if (num_repeats < 1) throw ConfigError("config: num_repeats must be >= 1");
  if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
    throw ConfigError("config: subsample_fraction must be in (0,1]");
  }
  const bool pregiven = !train_csv.empty() && !test_csv.empty();
  if (!pregiven && data_csv.empty()) {
    throw ConfigError("config: provide train_csv+test_csv or data_csv");
  }
  train.validate();
  uq.validate();
}

nlohmann::json RunConfig::to_json() const {
  return {{"dataset", dataset},
          {"train_csv", train_csv},
          {"test_csv", test_csv},
          {"data_csv", data_csv},
          {"split",
           {{"mode", split.mode == SplitSpec::Mode::kPregivenFiles ? "pregiven-files" : "stratified-random"},
            {"train_fraction", split.train_fraction},
            {"seed", split.seed}}},
          {"normalize", normalize},
          {"class_weighted_loss", class_weighted_loss},
          {"subsample_fraction", subsample_fraction},
          {"subsample_seed", subsample_seed},
          {"arch", arch.to_json()},
          {"train", train.to_json()},
          {"uq",
           {{"method", uq.method_name()}, {"passes", uq.passes}, {"members", uq.members}, {"base_seed", uq.base_seed}}},
          {"threshold",
           {{"mode", threshold.mode == ThresholdPolicy::Mode::kFixed ? "fixed" : "maximize-uacc-on-validation"},
            {"value", threshold.value},
            {"validation_fraction", threshold.validation_fraction},
            {"grid", threshold.grid}}},
          {"out_dir", out_dir},
          {"num_repeats", num_repeats},
          {"threads", threads}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.dataset = j.value("dataset", cfg.dataset);
  cfg.train_csv = j.value("train_csv", cfg.train_csv);
  cfg.test_csv = j.value("test_csv", cfg.test_csv);
  cfg.data_csv = j.value("data_csv", cfg.data_csv);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    const std::string mode = s.value("mode", "stratified-random");
    if (mode == "pregiven-files") {
      cfg.split.mode = SplitSpec::Mode::kPregivenFiles;
    } else if (mode == "stratified-random") {
      cfg.split.mode = SplitSpec::Mode::kStratifiedRandom;
    } else {
      throw ConfigError("config: unknown split mode '" + mode + "'");
    }
    cfg.split.train_fraction = s.value("train_fraction", cfg.split.train_fraction);
    cfg.split.seed = s.value("seed", cfg.split.seed);
  }
  cfg.normalize = j.value("normalize", cfg.normalize);
  cfg.class_weighted_loss = j.value("class_weighted_loss", cfg.class_weighted_loss);
  cfg.subsample_fraction = j.value("subsample_fraction", cfg.subsample_fraction);
  cfg.subsample_seed = j.value("subsample_seed", cfg.subsample_seed);
  if (j.contains("arch")) cfg.arch = ArchitectureSpec::from_json(j.at("arch"));
  if (j.contains("train")) cfg.train = nn::TrainConfig::from_json(j.at("train"));
  if (j.contains("uq")) {
    const auto& u = j.at("uq");
    cfg.uq.method = UqConfig::method_from_name(u.value("method", "mcd"));
    cfg.uq.passes = u.value("passes", cfg.uq.passes);
    cfg.uq.members = u.value("members", cfg.uq.members);
    cfg.uq.base_seed = u.value("base_seed", cfg.uq.base_seed);
  }
  if (j.contains("threshold")) {
    const auto& t = j.at("threshold");
    const std::string mode = t.value("mode", "fixed");
    if (mode == "fixed") {
      cfg.threshold.mode = ThresholdPolicy::Mode::kFixed;
    } else if (mode == "maximize-uacc-on-validation") {
      cfg.threshold.mode = ThresholdPolicy::Mode::kMaximizeUaccOnValidation;
    } else {
      throw ConfigError("config: unknown threshold mode '" + mode + "'");
    }
    cfg.threshold.value = t.value("value", cfg.threshold.value);
    cfg.threshold.validation_fraction = t.value("validation_fraction", cfg.threshold.validation_fraction);
    cfg.threshold.grid = t.value("grid", cfg.threshold.grid);
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.num_repeats = j.value("num_repeats", cfg.num_repeats);
  cfg.threads = j.value("threads", cfg.threads);
  return cfg;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string dump = cfg.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

LoadedData load_run_data(const RunConfig& cfg) {
  const DatasetMeta meta = cfg.meta();
  LoadedData data{meta, {}, {}};

  if (!cfg.train_csv.empty() && !cfg.test_csv.empty()) {
    auto result = split_pregiven(load_csv(cfg.train_csv, meta), load_csv(cfg.test_csv, meta));
    data.train = std::move(result.train);
    data.test = std::move(result.test);
  } else {
    auto records = load_csv(cfg.data_csv, meta);
    if (records.empty()) throw LoadError("dataset " + cfg.data_csv + " is empty");
    auto result = split(records, cfg.split);
    data.train = std::move(result.train);
    data.test = std::move(result.test);
  }

  if (cfg.normalize) {
    normalize_minmax(data.train);
    normalize_minmax(data.test);
  }

  if (cfg.subsample_fraction < 1.0) {
    SplitSpec sub{SplitSpec::Mode::kStratifiedRandom, cfg.subsample_fraction, cfg.subsample_seed};
    data.train = split(data.train, sub).train;
    data.test = split(data.test, sub).train;
  }
  return data;
}

namespace {

void apply_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) set_num_threads(cfg.threads);
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path);
}

nlohmann::json uq_metrics_json(const UncertaintyConfusion& conf, const UncertaintyMetrics& m) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"cc", conf.cc},      {"cu", conf.cu},      {"ic", conf.ic},      {"iu", conf.iu},
          {"uacc", m.uacc},     {"usen", opt(m.usen)}, {"uspe", opt(m.uspe)}, {"upre", opt(m.upre)}};
}

std::vector<Model> load_members(const RunConfig& cfg, const std::vector<std::string>& checkpoints,
                                int needed) {
  if (static_cast<int>(checkpoints.size()) < needed) {
    throw ConfigError("need " + std::to_string(needed) + " checkpoints for method " + cfg.uq.method_name() +
                      ", got " + std::to_string(checkpoints.size()));
  }
  std::vector<Model> members;
  for (int i = 0; i < needed; ++i) {
    Model m = load_checkpoint(checkpoints[static_cast<std::size_t>(i)]);
    if (m.arch.kind != cfg.arch.kind || m.arch.num_classes != cfg.meta().num_classes) {
      throw ConfigError("checkpoint " + checkpoints[static_cast<std::size_t>(i)] +
                        " does not match the configured architecture/dataset");
    }
    members.push_back(std::move(m));
  }
  return members;
}

std::vector<const Model*> member_ptrs(const std::vector<Model>& members) {
  std::vector<const Model*> ptrs;
  ptrs.reserve(members.size());
  for (const auto& m : members) ptrs.push_back(&m);
  return ptrs;
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<std::string> cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  apply_threads(cfg);
  fs::create_directories(cfg.out_dir);

  LoadedData data = load_run_data(cfg);
  if (data.train.empty()) throw LoadError("training split is empty");
  ArchitectureSpec arch = cfg.arch;
  arch.num_classes = data.meta.num_classes;

  const Tensor x = to_matrix(data.train);
  const auto y = to_labels(data.train);

  nn::TrainConfig tcfg = cfg.train;
  if (cfg.class_weighted_loss && !tcfg.class_weights) {
    tcfg.class_weights = inverse_frequency_weights(data.train, data.meta.num_classes);
  }

  const int members = std::max(cfg.uq.required_members(), cfg.num_repeats);
  std::vector<std::string> paths;
  nlohmann::json seeds = nlohmann::json::array();
  nlohmann::json losses = nlohmann::json::array();

  for (int k = 0; k < members; ++k) {
    const std::uint64_t init_seed = mix_seed({cfg.train.seed, 0x696eULL, static_cast<std::uint64_t>(k)});
    nn::TrainConfig member_cfg = tcfg;
    member_cfg.seed = mix_seed({cfg.train.seed, 0x7472ULL, static_cast<std::uint64_t>(k)});

    Model model = build_model(arch, init_seed);
    log << "training member " << k << " (" << arch.kind_name() << ", " << data.train.size() << " records, "
        << member_cfg.epochs << " epochs)\n";
    auto result = nn::train(model.net, x, y, data.meta.num_classes, member_cfg);
    model.train_config = member_cfg;
    model.train_seed = init_seed;

    const std::string path = cfg.out_dir + "/member_" + std::to_string(k) + ".ckpt.json";
    save_checkpoint(model, path);
    paths.push_back(path);
    seeds.push_back({{"member", k}, {"init_seed", init_seed}, {"train_seed", member_cfg.seed}});
    losses.push_back(result.epoch_loss);
    log << "  final epoch loss " << result.epoch_loss.back() << "\n";
  }

  // Loss curves as CSV (member, epoch, loss).
  {
    std::ofstream out(cfg.out_dir + "/loss_curves.csv", std::ios::binary);
    out << "member,epoch,loss\n";
    for (std::size_t k = 0; k < losses.size(); ++k) {
      const auto& curve = losses[k];
      for (std::size_t e = 0; e < curve.size(); ++e) {
        out << k << ',' << e << ',' << curve[e].get<double>() << '\n';
      }
    }
  }

  nlohmann::json manifest{{"version", kVersion},
                          {"config_hash", hash_hex(config_hash(cfg))},
                          {"config", cfg.to_json()},
                          {"seeds", seeds},
                          {"data",
                           {{"train_rows", data.train.size()},
                            {"test_rows", data.test.size()},
                            {"train_class_histogram", class_histogram(data.train, data.meta.num_classes)},
                            {"test_class_histogram", class_histogram(data.test, data.meta.num_classes)}}},
                          {"artifacts", paths}};
  write_json(cfg.out_dir + "/manifest.json", manifest);
  return paths;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log) {
  cfg.validate();
  apply_threads(cfg);
  fs::create_directories(cfg.out_dir);
  if (checkpoints.empty()) throw ConfigError("evaluate: no checkpoints given");

  LoadedData data = load_run_data(cfg);
  if (data.test.empty()) throw LoadError("test split is empty");
  const Tensor x = to_matrix(data.test);
  const auto y = to_labels(data.test);

  auto members = load_members(cfg, checkpoints, static_cast<int>(checkpoints.size()));
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> acc, pre, rec, f1;
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto preds = nn::predict_classes(members[k].net, x);
    const auto rep = classification_report(preds, y, data.meta.num_classes);
    runs.push_back(rep.to_json());
    acc.push_back(rep.accuracy);
    pre.push_back(rep.precision);
    rec.push_back(rep.recall);
    f1.push_back(rep.f1);
    log << "checkpoint " << checkpoints[k] << ": accuracy " << rep.accuracy << "\n";
  }

  auto agg = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    return std::pair<double, double>(mean, sample_std(v, mean));
  };
  const auto [acc_m, acc_s] = agg(acc);
  const auto [pre_m, pre_s] = agg(pre);
  const auto [rec_m, rec_s] = agg(rec);
  const auto [f1_m, f1_s] = agg(f1);

  nlohmann::json report{{"dataset", cfg.dataset},
                        {"arch", cfg.arch.kind_name()},
                        {"num_runs", members.size()},
                        {"runs", runs},
                        {"accuracy_mean", acc_m},
                        {"accuracy_std", acc_s},
                        {"precision_mean", pre_m},
                        {"precision_std", pre_s},
                        {"recall_mean", rec_m},
                        {"recall_std", rec_s},
                        {"f1_mean", f1_m},
                        {"f1_std", f1_s}};
  write_json(cfg.out_dir + "/evaluation.json", report);
  return 0;
}

int cmd_uq(const RunConfig& cfg, const std::vector<std::string>& checkpoints, std::ostream& log) {
  cfg.validate();
  apply_threads(cfg);
  fs::create_directories(cfg.out_dir);

  LoadedData data = load_run_data(cfg);
  if (data.test.empty()) throw LoadError("test split is empty");
  const Tensor x = to_matrix(data.test);
  const auto y = to_labels(data.test);

  auto members = load_members(cfg, checkpoints, cfg.uq.required_members());
  const auto ptrs = member_ptrs(members);
  log << "uq " << cfg.uq.method_name() << " over " << ptrs.size() << " member(s), " << data.test.size()
      << " records\n";
  auto preds = batch_uq(ptrs, x, cfg.uq);

  const auto thr = apply_threshold(preds, y, cfg.threshold);
  mark_certainty(preds, thr.threshold);
  const auto umetrics = uncertainty_metrics(thr.confusion);
  const auto per_class = per_class_uacc(preds, y, thr.threshold, data.meta.num_classes);

  std::vector<int> pred_classes(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) pred_classes[i] = preds[i].predicted_class;
  const auto rep = classification_report(pred_classes, y, data.meta.num_classes);

  const auto density = entropy_density_export(preds, y, 50);

  nlohmann::json per_class_json = nlohmann::json::array();
  for (const auto& v : per_class) per_class_json.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));

  nlohmann::json report{{"dataset", cfg.dataset},
                        {"arch", cfg.arch.kind_name()},
                        {"uq_method", cfg.uq.method_name()},
                        {"T", cfg.uq.passes},
                        {"N", cfg.uq.required_members()},
                        {"threshold", thr.threshold},
                        {"classification", rep.to_json()},
                        {"uncertainty", uq_metrics_json(thr.confusion, umetrics)},
                        {"per_class_uacc", per_class_json}};
  write_json(cfg.out_dir + "/uq_report.json", report);
  write_prediction_csv(cfg.out_dir + "/predictions.csv", preds, y);
  write_density_csv(cfg.out_dir + "/entropy_density.csv", density);
  log << "uacc " << umetrics.uacc << " at threshold " << thr.threshold << "\n";
  return 0;
}

int cmd_spectrogram_export(const RunConfig& cfg, int count, std::ostream& log) {
  cfg.validate();
  apply_threads(cfg);
  fs::create_directories(cfg.out_dir);
  LoadedData data = load_run_data(cfg);
  const auto& records = data.test.empty() ? data.train : data.test;
  const int n = std::min<int>(count, static_cast<int>(records.size()));
  for (int i = 0; i < n; ++i) {
    const auto spec = spectrogram(records[static_cast<std::size_t>(i)], cfg.arch.stft);
    char name[64];
    std::snprintf(name, sizeof(name), "/spectrogram_%05d_label%d.csv", i, records[static_cast<std::size_t>(i)].label);
    write_spectrogram_csv(cfg.out_dir + name, spec);
  }
  log << "wrote " << n << " spectrogram CSVs to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_table4_oracle(const std::string& csv_path, std::ostream& out) {
  std::vector<PublishedUqRow> rows;
  if (csv_path.empty()) {
    auto span = published_uq_rows();
    rows.assign(span.begin(), span.end());
  } else {
    rows = load_uq_rows_csv(csv_path);
  }
  int failures = 0;
  for (const auto& row : rows) {
    const auto check = check_published_row(row);
    out << (check.pass ? "PASS" : "FAIL") << ' ' << row.dataset << '/' << row.model << '/' << row.method;
    if (!check.pass) {
      out << "  [" << check.detail << ']';
      ++failures;
    }
    out << '\n';
  }
  out << rows.size() - static_cast<std::size_t>(failures) << '/' << rows.size() << " rows verified\n";
  return failures == 0 ? 0 : 1;
}

int cmd_synth(const std::string& dataset, const std::string& out_dir, std::int64_t train_rows,
              std::int64_t test_rows, std::uint64_t seed, std::ostream& log) {
  const DatasetMeta meta = DatasetMeta::by_name(dataset);
  SynthConfig cfg;
  cfg.seed = seed;
  write_synth_corpus_files(out_dir, meta, train_rows, test_rows, cfg);
  log << "wrote " << out_dir << "/" << meta.name << "_train.csv (" << train_rows << " rows) and "
      << out_dir << "/" << meta.name << "_test.csv (" << test_rows << " rows)\n";
  return 0;
}

}  // namespace ecguq
