#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ecguq/commands.hpp"

namespace {

using ecguq::RunConfig;

// CLI flags override values loaded from --config.
struct Cli {
  std::string config_path;
  RunConfig cfg;
  std::vector<std::string> checkpoints;
};

void add_common_options(CLI::App* cmd, Cli& cli) {
  cmd->add_option("--config", cli.config_path, "JSON run configuration; flags override file values");
  cmd->add_option("--dataset", cli.cfg.dataset, "Corpus: mitbih or ptb");
  cmd->add_option("--train-csv", cli.cfg.train_csv, "Pregiven training split CSV");
  cmd->add_option("--test-csv", cli.cfg.test_csv, "Pregiven test split CSV");
  cmd->add_option("--csv", cli.cfg.data_csv, "Single CSV to split stratified");
  cmd->add_option(
      "--split-fraction", cli.cfg.split.train_fraction, "Train fraction for stratified splits");
  cmd->add_option("--split-seed", cli.cfg.split.seed, "Seed for stratified splits");
  cmd->add_flag("--normalize", cli.cfg.normalize, "Min-max normalize each record");
  cmd->add_flag("--class-weights", cli.cfg.class_weighted_loss, "Inverse-frequency loss weights");
  cmd->add_option("--subsample", cli.cfg.subsample_fraction, "Stratified subsample fraction (desk-scale runs)");
  cmd->add_option("--subsample-seed", cli.cfg.subsample_seed, "Subsample seed");
  cmd->add_option("--out", cli.cfg.out_dir, "Output directory");
  cmd->add_option("--threads", cli.cfg.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--repeats", cli.cfg.num_repeats, "Independently trained runs for mean/std reporting");

  cmd->add_option_function<std::string>(
      "--arch", [&cli](const std::string& v) { cli.cfg.arch.kind = ecguq::ArchitectureSpec::kind_from_name(v); },
      "Architecture: lstm, cnn1d, transformer or uctecg");
  cmd->add_option("--dropout", cli.cfg.arch.dropout_rate, "Dropout rate");
  cmd->add_option_function<int>(
      "--patch-len", [&cli](int v) { cli.cfg.arch.transformer_patch_len = v; },
      "Transformer patch length (default: whole segment as one token)");

  cmd->add_option("--epochs", cli.cfg.train.epochs, "Training epochs");
  cmd->add_option("--batch-size", cli.cfg.train.batch_size, "Mini-batch size");
  cmd->add_option("--lr", cli.cfg.train.learning_rate, "Learning rate");
  cmd->add_option_function<std::string>(
      "--optimizer",
      [&cli](const std::string& v) {
        if (v == "adam") {
          cli.cfg.train.optimizer = ecguq::nn::TrainConfig::Optimizer::kAdam;
        } else if (v == "sgd") {
          cli.cfg.train.optimizer = ecguq::nn::TrainConfig::Optimizer::kSgd;
        } else {
          throw CLI::ValidationError("--optimizer", "expected adam or sgd");
        }
      },
      "Optimizer: adam or sgd");
  cmd->add_option("--seed", cli.cfg.train.seed, "Base training seed");

  cmd->add_option_function<std::string>(
      "--method", [&cli](const std::string& v) { cli.cfg.uq.method = ecguq::UqConfig::method_from_name(v); },
      "UQ method: mcd, ensemble or emcd");
  cmd->add_option("--passes", cli.cfg.uq.passes, "T: stochastic passes per model");
  cmd->add_option("--members", cli.cfg.uq.members, "N: ensemble members");
  cmd->add_option("--uq-seed", cli.cfg.uq.base_seed, "Base seed for UQ pass streams");

  cmd->add_option_function<double>(
      "--threshold",
      [&cli](double v) {
        cli.cfg.threshold.mode = ecguq::ThresholdPolicy::Mode::kFixed;
        cli.cfg.threshold.value = v;
      },
      "Fixed normalized-entropy certainty threshold in [0,1]");
  cmd->add_flag_function(
      "--sweep-threshold",
      [&cli](std::int64_t) { cli.cfg.threshold.mode = ecguq::ThresholdPolicy::Mode::kMaximizeUaccOnValidation; },
      "Pick the threshold maximizing UAcc on a validation slice");
}

// Re-parse on top of file-loaded defaults so explicit flags win.
RunConfig resolve_config(const Cli& cli, CLI::App* cmd) {
  if (cli.config_path.empty()) return cli.cfg;
  std::ifstream in(cli.config_path);
  if (!in) throw ecguq::ConfigError("cannot open config " + cli.config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ecguq::ConfigError("bad config JSON: " + std::string(e.what()));
  }
  RunConfig cfg = RunConfig::from_json(j);
  // Overlay every flag the user actually passed.
  RunConfig flags = cli.cfg;
  for (const auto* opt : cmd->get_options()) {
    if (opt->count() == 0) continue;
    const std::string name = opt->get_name();
    if (name == "--dataset") cfg.dataset = flags.dataset;
    if (name == "--train-csv") cfg.train_csv = flags.train_csv;
    if (name == "--test-csv") cfg.test_csv = flags.test_csv;
    if (name == "--csv") cfg.data_csv = flags.data_csv;
    if (name == "--split-fraction") cfg.split.train_fraction = flags.split.train_fraction;
    if (name == "--split-seed") cfg.split.seed = flags.split.seed;
    if (name == "--normalize") cfg.normalize = flags.normalize;
    if (name == "--class-weights") cfg.class_weighted_loss = flags.class_weighted_loss;
    if (name == "--subsample") cfg.subsample_fraction = flags.subsample_fraction;
    if (name == "--subsample-seed") cfg.subsample_seed = flags.subsample_seed;
    if (name == "--out") cfg.out_dir = flags.out_dir;
    if (name == "--threads") cfg.threads = flags.threads;
    if (name == "--repeats") cfg.num_repeats = flags.num_repeats;
    if (name == "--arch") cfg.arch.kind = flags.arch.kind;
    if (name == "--dropout") cfg.arch.dropout_rate = flags.arch.dropout_rate;
    if (name == "--patch-len") cfg.arch.transformer_patch_len = flags.arch.transformer_patch_len;
    if (name == "--epochs") cfg.train.epochs = flags.train.epochs;
    if (name == "--batch-size") cfg.train.batch_size = flags.train.batch_size;
    if (name == "--lr") cfg.train.learning_rate = flags.train.learning_rate;
    if (name == "--optimizer") cfg.train.optimizer = flags.train.optimizer;
    if (name == "--seed") cfg.train.seed = flags.train.seed;
    if (name == "--method") cfg.uq.method = flags.uq.method;
    if (name == "--passes") cfg.uq.passes = flags.uq.passes;
    if (name == "--members") cfg.uq.members = flags.uq.members;
    if (name == "--uq-seed") cfg.uq.base_seed = flags.uq.base_seed;
    if (name == "--threshold") cfg.threshold = flags.threshold;
    if (name == "--sweep-threshold") cfg.threshold.mode = flags.threshold.mode;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware ECG heartbeat classification"};
  app.require_subcommand(1);

  Cli cli;

  auto* train = app.add_subcommand("train", "Train member models and write checkpoints + manifest");
  add_common_options(train, cli);

  auto* evaluate = app.add_subcommand("evaluate", "Deterministic test-set evaluation of checkpoints");
  add_common_options(evaluate, cli);
  evaluate->add_option("checkpoints", cli.checkpoints, "Checkpoint files")->required();

  auto* uq = app.add_subcommand("uq", "Uncertainty quantification: report, prediction dump, densities");
  add_common_options(uq, cli);
  uq->add_option("checkpoints", cli.checkpoints, "Checkpoint files")->required();

  auto* spect = app.add_subcommand("spectrogram", "Export spectrogram CSVs for figure reproduction");
  add_common_options(spect, cli);
  int spect_count = 8;
  spect->add_option("--count", spect_count, "How many records to export");

  auto* oracle = app.add_subcommand("table4-oracle", "Recompute the published UQ table from its counts");
  std::string oracle_csv;
  oracle->add_option("--csv", oracle_csv, "Row CSV (default: embedded published rows)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic demo corpus in the public CSV format");
  std::string synth_dataset = "ptb", synth_out = "data";
  std::int64_t synth_train = 11641, synth_test = 2911;
  std::uint64_t synth_seed = 0;
  bool synth_full = false;
  synth->add_option("--dataset", synth_dataset, "mitbih or ptb");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--train-rows", synth_train, "Training rows");
  synth->add_option("--test-rows", synth_test, "Test rows");
  synth->add_flag("--full", synth_full, "Use the public corpus row counts for the chosen dataset");
  synth->add_option("--seed", synth_seed, "Generator seed");

  try {
    app.parse(argc, argv);

    if (train->parsed()) {
      cmd_train(resolve_config(cli, train), std::cout);
      return 0;
    }
    if (evaluate->parsed()) {
      return ecguq::cmd_evaluate(resolve_config(cli, evaluate), cli.checkpoints, std::cout);
    }
    if (uq->parsed()) {
      return ecguq::cmd_uq(resolve_config(cli, uq), cli.checkpoints, std::cout);
    }
    if (spect->parsed()) {
      return ecguq::cmd_spectrogram_export(resolve_config(cli, spect), spect_count, std::cout);
    }
    if (oracle->parsed()) {
      return ecguq::cmd_table4_oracle(oracle_csv, std::cout);
    }
    if (synth->parsed()) {
      if (synth_full) {
        if (synth_dataset == "mitbih") {
          synth_train = 87554;
          synth_test = 21892;
        } else {
          synth_train = 11641;
          synth_test = 2911;
        }
      }
      return ecguq::cmd_synth(synth_dataset, synth_out, synth_train, synth_test, synth_seed, std::cout);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ecguq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ecguq::LoadError& e) {
    // Unreadable or malformed input data is a usage problem.
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
