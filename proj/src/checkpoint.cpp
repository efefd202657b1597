#include "blocksync/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "blocksync/errors.hpp"
#include "blocksync/text.hpp"

namespace blocksync {

namespace {

constexpr std::string_view kMagic = "blocksync-checkpoint";
constexpr unsigned kVersion = 1;

std::string expect_field(std::istream& in, std::string_view name) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("checkpoint: missing '" + std::string(name) + "' line");
  std::string_view v = trim(line);
  if (v.substr(0, name.size()) != name || v.size() <= name.size() || v[name.size()] != ' ') {
    throw IoError("checkpoint: expected '" + std::string(name) + "', got '" + line + "'");
  }
  return std::string(trim(v.substr(name.size() + 1)));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << ' ' << kVersion << '\n'
      << "strategy " << to_string(ckpt.strategy) << '\n'
      << "block " << ckpt.block_index << '\n'
      << "epoch " << format_double(ckpt.epoch) << '\n'
      << "length " << ckpt.params.size() << '\n';
  for (double v : ckpt.params) out << format_double(v) << '\n';
  if (!out) throw IoError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  const auto version = parse_uint(expect_field(in, kMagic));
  if (!version || *version != kVersion) throw IoError("checkpoint: unsupported version");
  Checkpoint ckpt;
  ckpt.strategy = parse_strategy(expect_field(in, "strategy"));
  const auto block = parse_uint(expect_field(in, "block"));
  const auto epoch = parse_double(expect_field(in, "epoch"));
  const auto length = parse_uint(expect_field(in, "length"));
  if (!block || !epoch || !length) throw IoError("checkpoint: malformed header");
  ckpt.block_index = *block;
  ckpt.epoch = *epoch;
  std::vector<double> values;
  values.reserve(*length);
  std::string line;
  for (unsigned long long i = 0; i < *length; ++i) {
    if (!std::getline(in, line)) throw IoError("checkpoint: truncated parameter list");
    const auto v = parse_double(line);
    if (!v) throw IoError("checkpoint: malformed value '" + line + "'");
    values.push_back(*v);
  }
  ckpt.params = ParamVector(std::move(values));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace blocksync
