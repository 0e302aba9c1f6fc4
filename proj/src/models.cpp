#include "ecguq/models.hpp"

#include <fstream>

#include "ecguq/nn/layers.hpp"
#include "ecguq/nn/lstm.hpp"
#include "ecguq/nn/transformer.hpp"

namespace ecguq {

using nn::Layer;

namespace {

constexpr int kCheckpointVersion = 1;

void check_classes(int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
}

std::unique_ptr<nn::Sequential> seq() {
  return std::make_unique<nn::Sequential>();
}

}  // namespace

const char* ArchitectureSpec::kind_name() const {
  switch (kind) {
    case Kind::kLstm:
      return "lstm";
    case Kind::kCnn1d:
      return "cnn1d";
    case Kind::kTransformer:
      return "transformer";
    case Kind::kUctecg:
      return "uctecg";
  }
  return "?";
}

ArchitectureSpec::Kind ArchitectureSpec::kind_from_name(const std::string& name) {
  if (name == "lstm") return Kind::kLstm;
  if (name == "cnn1d") return Kind::kCnn1d;
  if (name == "transformer") return Kind::kTransformer;
  if (name == "uctecg") return Kind::kUctecg;
  throw ConfigError("unknown architecture '" + name + "' (expected lstm, cnn1d, transformer or uctecg)");
}

nlohmann::json ArchitectureSpec::to_json() const {
  nlohmann::json j{{"kind", kind_name()}, {"num_classes", num_classes}, {"dropout_rate", dropout_rate}};
  if (transformer_patch_len) {
    j["transformer_patch_len"] = *transformer_patch_len;
  } else {
    j["transformer_patch_len"] = nullptr;
  }
  j["stft"] = {{"window_len", stft.window_len},
               {"hop", stft.hop},
               {"fft_len", stft.fft_len},
               {"window_fn", static_cast<int>(stft.window_fn)},
               {"log_scale", stft.log_scale}};
  return j;
}

ArchitectureSpec ArchitectureSpec::from_json(const nlohmann::json& j) {
  ArchitectureSpec spec;
  spec.kind = kind_from_name(j.at("kind").get<std::string>());
  spec.num_classes = j.at("num_classes").get<int>();
  spec.dropout_rate = j.at("dropout_rate").get<double>();
  if (j.contains("transformer_patch_len") && !j.at("transformer_patch_len").is_null()) {
    spec.transformer_patch_len = j.at("transformer_patch_len").get<int>();
  }
  const auto& s = j.at("stft");
  spec.stft.window_len = s.at("window_len").get<int>();
  spec.stft.hop = s.at("hop").get<int>();
  spec.stft.fft_len = s.at("fft_len").get<int>();
  spec.stft.window_fn = static_cast<StftConfig::Window>(s.at("window_fn").get<int>());
  spec.stft.log_scale = s.at("log_scale").get<bool>();
  return spec;
}

Model build_lstm(int num_classes, double dropout_rate, std::uint64_t init_seed) {
  check_classes(num_classes);
  auto net = seq();
  net->add(std::make_unique<nn::Patchify>(1));  // (B,187) -> (B,187,1)
  net->add(std::make_unique<nn::Lstm>(1, 64, 2));
  net->add(std::make_unique<nn::LastStep>());
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(64, 16));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(16, num_classes));
  net->add(std::make_unique<nn::Softmax>());

  Model m{nn::Network(std::move(net)),
          ArchitectureSpec{ArchitectureSpec::Kind::kLstm, num_classes, dropout_rate, std::nullopt, {}},
          std::nullopt, std::nullopt};
  m.net.reset_parameters(init_seed);
  return m;
}

Model build_cnn1d(int num_classes, double dropout_rate, std::uint64_t init_seed) {
  check_classes(num_classes);
  auto conv1 = std::make_unique<nn::Conv1d>(1, 16, 3, 1, 2);
  auto conv2 = std::make_unique<nn::Conv1d>(16, 32, 3, 1, 2);
  // 187 -> 189 -> pool 94 -> 96 -> pool 48; flattened feature width 32*48.
  const std::int64_t l1 = conv1->out_len(kSegmentLength) / 2;
  const std::int64_t l2 = conv2->out_len(l1) / 2;
  const std::int64_t flat = 32 * l2;
  if (flat != 1536) throw Error("cnn1d: flatten width " + std::to_string(flat) + ", expected 1536");

  auto net = seq();
  net->add(std::make_unique<nn::AsChannels>());
  net->add(std::move(conv1));
  net->add(std::make_unique<nn::BatchNorm1d>(16));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::MaxPool1d>(2));
  net->add(std::move(conv2));
  net->add(std::make_unique<nn::BatchNorm1d>(32));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::MaxPool1d>(2));
  net->add(std::make_unique<nn::Flatten>());
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(flat, 16));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::Linear>(16, num_classes));
  net->add(std::make_unique<nn::Softmax>());

  Model m{nn::Network(std::move(net)),
          ArchitectureSpec{ArchitectureSpec::Kind::kCnn1d, num_classes, dropout_rate, std::nullopt, {}},
          std::nullopt, std::nullopt};
  m.net.reset_parameters(init_seed);
  return m;
}

Model build_transformer(int num_classes, std::optional<int> patch_len, double dropout_rate,
                        std::uint64_t init_seed) {
  check_classes(num_classes);
  const int patch = patch_len.value_or(kSegmentLength);
  if (patch < 1 || patch > kSegmentLength) {
    throw ConfigError("transformer: patch_len must be in [1," + std::to_string(kSegmentLength) + "]");
  }
  const std::int64_t tokens = (kSegmentLength + patch - 1) / patch;

  auto net = seq();
  net->add(std::make_unique<nn::Patchify>(patch));
  net->add(std::make_unique<nn::Linear>(patch, 128));
  net->add(std::make_unique<nn::TransformerEncoder>(128, 2, 2, 4 * 128, dropout_rate, tokens));
  net->add(std::make_unique<nn::MeanOverTime>());
  net->add(std::make_unique<nn::Linear>(128, 16));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(16, num_classes));
  net->add(std::make_unique<nn::Softmax>());

  Model m{nn::Network(std::move(net)),
          ArchitectureSpec{ArchitectureSpec::Kind::kTransformer, num_classes, dropout_rate, patch_len, {}},
          std::nullopt, std::nullopt};
  m.net.reset_parameters(init_seed);
  return m;
}

Model build_uctecg(int num_classes, const StftConfig& stft, double dropout_rate, std::uint64_t init_seed) {
  check_classes(num_classes);
  stft.validate();
  const int frames = stft.num_frames(kSegmentLength);
  const int bins = stft.num_bins();
  if (frames < 1) throw ConfigError("uctecg: stft config yields no frames for 187-sample segments");

  // Signal branch: four length-preserving conv layers, 64 filters each,
  // then global average pooling down to a 64-wide descriptor.
  auto signal = seq();
  signal->add(std::make_unique<nn::AsChannels>());
  signal->add(std::make_unique<nn::Conv1d>(1, 64, 3, 1, 1));
  signal->add(std::make_unique<nn::ReLU>());
  for (int i = 0; i < 3; ++i) {
    signal->add(std::make_unique<nn::Conv1d>(64, 64, 3, 1, 1));
    signal->add(std::make_unique<nn::ReLU>());
  }
  signal->add(std::make_unique<nn::AdaptiveAvgPool1d>(1));
  signal->add(std::make_unique<nn::Flatten>());

  // Spectrogram branch: frames become tokens, embedded to 128 dims and run
  // through the two-layer, two-head encoder.
  auto spectral = seq();
  spectral->add(std::make_unique<nn::SpectrogramLayer>(stft));
  spectral->add(std::make_unique<nn::Linear>(bins, 128));
  spectral->add(std::make_unique<nn::TransformerEncoder>(128, 2, 2, 4 * 128, dropout_rate, frames));
  spectral->add(std::make_unique<nn::MeanOverTime>());

  auto net = seq();
  net->add(std::make_unique<nn::TwoBranch>(std::move(signal), std::move(spectral)));
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(64 + 128, 64));
  net->add(std::make_unique<nn::ReLU>());
  net->add(std::make_unique<nn::Dropout>(dropout_rate));
  net->add(std::make_unique<nn::Linear>(64, num_classes));
  net->add(std::make_unique<nn::Softmax>());

  Model m{nn::Network(std::move(net)),
          ArchitectureSpec{ArchitectureSpec::Kind::kUctecg, num_classes, dropout_rate, std::nullopt, stft},
          std::nullopt, std::nullopt};
  m.net.reset_parameters(init_seed);
  return m;
}

Model build_model(const ArchitectureSpec& spec, std::uint64_t init_seed) {
  switch (spec.kind) {
    case ArchitectureSpec::Kind::kLstm:
      return build_lstm(spec.num_classes, spec.dropout_rate, init_seed);
    case ArchitectureSpec::Kind::kCnn1d:
      return build_cnn1d(spec.num_classes, spec.dropout_rate, init_seed);
    case ArchitectureSpec::Kind::kTransformer:
      return build_transformer(spec.num_classes, spec.transformer_patch_len, spec.dropout_rate, init_seed);
    case ArchitectureSpec::Kind::kUctecg:
      return build_uctecg(spec.num_classes, spec.stft, spec.dropout_rate, init_seed);
  }
  throw ConfigError("build_model: invalid architecture kind");
}

void save_checkpoint(Model& model, const std::string& path) {
  nlohmann::json j = nn::network_to_json(model.net);
  j["format"] = "ecguq-checkpoint";
  j["format_version"] = kCheckpointVersion;
  j["arch"] = model.arch.to_json();
  j["train_config"] = model.train_config ? model.train_config->to_json() : nlohmann::json(nullptr);
  j["train_seed"] = model.train_seed ? nlohmann::json(*model.train_seed) : nlohmann::json(nullptr);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out << j.dump();
  out << '\n';
  if (!out) throw CheckpointError("write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.value("format", "") != "ecguq-checkpoint") {
      throw CheckpointError("not an ecguq checkpoint: " + path);
    }
    if (j.at("format_version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + j.at("format_version").dump());
    }
    Model m{nn::network_from_json(j), ArchitectureSpec::from_json(j.at("arch")), std::nullopt, std::nullopt};
    if (!j.at("train_config").is_null()) m.train_config = nn::TrainConfig::from_json(j.at("train_config"));
    if (!j.at("train_seed").is_null()) m.train_seed = j.at("train_seed").get<std::uint64_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path + ": " + e.what());
  }
}

}  // namespace ecguq
