#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>

#include "blocksync/errors.hpp"
#include "blocksync/experiment.hpp"
#include "blocksync/text.hpp"

namespace blocksync {

namespace {

struct Field {
  const char* key;
  const char* comment;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

std::size_t to_size(std::string_view key, std::string_view v) {
  const auto n = parse_uint(v);
  if (!n) throw ConfigError(std::string(key), "expected a non-negative integer, got '" + std::string(v) + "'");
  return static_cast<std::size_t>(*n);
}

double to_real(std::string_view key, std::string_view v) {
  const auto x = parse_double(v);
  if (!x || !std::isfinite(*x)) throw ConfigError(std::string(key), "expected a finite real, got '" + std::string(v) + "'");
  return *x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(std::string(key), "expected true or false, got '" + std::string(v) + "'");
}

std::string size_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(to_size(key, v.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

#define SIZE_FIELD(name, member, comment)                                           \
  Field {                                                                           \
    name, comment, [](const ExperimentConfig& c) { return std::to_string(c.member); }, \
        [](ExperimentConfig& c, std::string_view v) { c.member = to_size(name, v); } \
  }
#define REAL_FIELD(name, member, comment)                                          \
  Field {                                                                          \
    name, comment, [](const ExperimentConfig& c) { return format_double(c.member); }, \
        [](ExperimentConfig& c, std::string_view v) { c.member = to_real(name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"model", "mlp or lstm",
       [](const ExperimentConfig& c) { return std::string(c.model == ModelKind::kMlp ? "mlp" : "lstm"); },
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "mlp") {
           c.model = ModelKind::kMlp;
         } else if (v == "lstm") {
           c.model = ModelKind::kLstm;
         } else {
           throw ConfigError("model", "expected mlp or lstm, got '" + std::string(v) + "'");
         }
       }},
      {"mlp_hidden", "comma-separated hidden layer sizes (sigmoid)",
       [](const ExperimentConfig& c) { return size_list(c.mlp_hidden); },
       [](ExperimentConfig& c, std::string_view v) { c.mlp_hidden = to_size_list("mlp_hidden", v); }},
      SIZE_FIELD("lstm_hidden", lstm_hidden, "LSTM cells per layer"),
      SIZE_FIELD("lstm_layers", lstm_layers, "stacked LSTM layers before the output layer"),
      SIZE_FIELD("workers", workers, "simulated workers N"),
      SIZE_FIELD("block_size", block_size, "local mini-batches per worker between synchronizations"),
      {"transport", "decentralized (sharded peer-to-peer) or centralized (parameter server)",
       [](const ExperimentConfig& c) { return std::string(to_string(c.transport)); },
       [](ExperimentConfig& c, std::string_view v) {
         try {
           c.transport = parse_transport(v);
         } catch (const ArgumentError&) {
           throw ConfigError("transport", "expected centralized or decentralized, got '" + std::string(v) + "'");
         }
       }},
      SIZE_FIELD("batch_utterances", batch_utterances, "utterances per local mini-batch"),
      {"reset_momentum", "zero worker momentum on every broadcast",
       [](const ExperimentConfig& c) { return std::string(c.reset_momentum ? "true" : "false"); },
       [](ExperimentConfig& c, std::string_view v) { c.reset_momentum = to_bool("reset_momentum", v); }},
      REAL_FIELD("block_momentum", block_momentum, "BMUF block momentum, [0, 1)"),
      REAL_FIELD("block_lr", block_lr, "BMUF block learning rate, > 0"),
      REAL_FIELD("ema_rate", ema_rate, "EMA exponential updating rate alpha, [0, 1]"),
      REAL_FIELD("learning_rate", learning_rate, "local SGD learning rate"),
      REAL_FIELD("momentum", momentum, "local SGD momentum, [0, 1)"),
      SIZE_FIELD("speakers", corpus.num_speakers, "synthetic corpus: speakers"),
      SIZE_FIELD("utterances_per_speaker", corpus.utterances_per_speaker, "synthetic corpus: utterances per speaker"),
      SIZE_FIELD("frames_per_utterance", corpus.frames_per_utterance, "synthetic corpus: frames per utterance"),
      SIZE_FIELD("base_dim", corpus.base_dim, "synthetic corpus: features per frame"),
      SIZE_FIELD("classes", corpus.num_classes, "synthetic corpus: frame classes"),
      REAL_FIELD("label_change_prob", corpus.label_change_prob, "synthetic corpus: per-frame label redraw probability"),
      REAL_FIELD("class_separation", corpus.class_separation, "synthetic corpus: std-dev of class means"),
      REAL_FIELD("speaker_spread", corpus.speaker_spread, "synthetic corpus: std-dev of speaker offsets"),
      REAL_FIELD("noise", corpus.noise, "synthetic corpus: per-frame noise std-dev"),
      SIZE_FIELD("stack", stack, "frames stacked (without overlap) into one input"),
      REAL_FIELD("split_train", split.train, "fraction of speakers in the training split"),
      REAL_FIELD("split_val", split.val, "fraction of speakers in the validation split"),
      REAL_FIELD("split_test", split.test, "fraction of speakers in the test split"),
      SIZE_FIELD("epochs", epochs, "passes over the training data"),
      SIZE_FIELD("checkpoints_per_epoch", checkpoints_per_epoch, "evaluated snapshots per epoch"),
      {"seed", "master seed; every random stream is derived from it",
       [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, std::string_view v) {
         const auto n = parse_uint(v);
         if (!n) throw ConfigError("seed", "expected an unsigned 64-bit integer, got '" + std::string(v) + "'");
         c.seed = *n;
       }},
      {"output_dir", "where artifacts go; the --out flag overrides it",
       [](const ExperimentConfig& c) { return c.output_dir; },
       [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
  };
  return table;
}

#undef SIZE_FIELD
#undef REAL_FIELD

}  // namespace

void validate(const ExperimentConfig& c) {
  const auto fail = [](const char* key, const char* msg) { throw ConfigError(key, msg); };
  if (c.model == ModelKind::kMlp) {
    for (auto h : c.mlp_hidden) {
      if (h == 0) fail("mlp_hidden", "hidden sizes must be positive");
    }
  } else {
    if (c.lstm_hidden == 0) fail("lstm_hidden", "must be at least 1");
    if (c.lstm_layers == 0) fail("lstm_layers", "must be at least 1");
  }
  if (c.workers == 0) fail("workers", "must be at least 1");
  if (c.block_size == 0) fail("block_size", "must be at least 1");
  if (c.batch_utterances == 0) fail("batch_utterances", "must be at least 1");
  if (!(c.block_momentum >= 0.0 && c.block_momentum < 1.0)) fail("block_momentum", "must lie in [0, 1)");
  if (!(c.block_lr > 0.0)) fail("block_lr", "must be positive");
  if (!(c.ema_rate >= 0.0 && c.ema_rate <= 1.0)) fail("ema_rate", "must lie in [0, 1]");
  if (!(c.learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) fail("momentum", "must lie in [0, 1)");
  if (c.corpus.num_speakers < 3) fail("speakers", "a speaker-disjoint split needs at least 3 speakers");
  if (c.corpus.utterances_per_speaker == 0) fail("utterances_per_speaker", "must be at least 1");
  if (c.corpus.base_dim == 0) fail("base_dim", "must be at least 1");
  if (c.corpus.num_classes == 0) fail("classes", "must be at least 1");
  if (!(c.corpus.label_change_prob >= 0.0 && c.corpus.label_change_prob <= 1.0)) {
    fail("label_change_prob", "must lie in [0, 1]");
  }
  if (!(c.corpus.class_separation >= 0.0)) fail("class_separation", "must be non-negative");
  if (!(c.corpus.speaker_spread >= 0.0)) fail("speaker_spread", "must be non-negative");
  if (!(c.corpus.noise >= 0.0)) fail("noise", "must be non-negative");
  if (c.stack == 0) fail("stack", "must be at least 1");
  if (c.corpus.frames_per_utterance < c.stack) fail("frames_per_utterance", "must be at least the stack size");
  if (c.split.train < 0.0) fail("split_train", "must be non-negative");
  if (c.split.val < 0.0) fail("split_val", "must be non-negative");
  if (c.split.test < 0.0) fail("split_test", "must be non-negative");
  if (std::abs(c.split.train + c.split.val + c.split.test - 1.0) > 1e-9) fail("split_test", "fractions must sum to 1");
  if (c.epochs == 0) fail("epochs", "must be at least 1");
  if (c.checkpoints_per_epoch == 0) fail("checkpoints_per_epoch", "must be at least 1");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::map<std::string, bool, std::less<>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(text), "line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key(trim(text.substr(0, eq)));
    const std::string_view value = trim(text.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (field == nullptr) throw ConfigError(key, "unknown key");
    if (seen[key]) throw ConfigError(key, "given more than once");
    seen[key] = true;
    field->set(config, value);
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += "# ";
    out += f.comment;
    out += '\n';
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

ModelSpec model_spec(const ExperimentConfig& config) {
  const std::size_t in = config.stack * config.corpus.base_dim;
  if (config.model == ModelKind::kMlp) {
    MlpSpec spec;
    spec.layer_sizes.push_back(in);
    spec.layer_sizes.insert(spec.layer_sizes.end(), config.mlp_hidden.begin(), config.mlp_hidden.end());
    spec.layer_sizes.push_back(config.corpus.num_classes);
    return spec;
  }
  return LstmSpec{in, config.lstm_hidden, config.lstm_layers, config.corpus.num_classes};
}

}  // namespace blocksync
