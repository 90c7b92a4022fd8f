// SPDX-License-Identifier: Apache-2.0
#include "rlpeft/harness/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <variant>

#include "rlpeft/errors.hpp"

namespace rlpeft::harness {
namespace {

constexpr char kMagic[4] = {'P', 'E', 'R', 'L'};
constexpr std::uint32_t kTrainable = 1;

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Cursor {
 public:
  explicit Cursor(const std::string& bytes) : b_(bytes) {}

  template <typename T>
  T take(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > b_.size() - pos_) throw FormatError(std::string("checkpoint truncated while reading ") + what);
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

struct Slot {
  std::string name;
  Var var;
  adapters::AdaLoraState* mask = nullptr;
};

std::vector<Slot> slots(policy::PolicyNet& net) {
  std::vector<Slot> out;
  for (const auto& p : net.parameters()) out.push_back({p.name, p.var, nullptr});
  for (auto* l : net.linears()) {
    if (auto* s = std::get_if<adapters::AdaLoraState>(&l->state())) out.push_back({l->name() + ".adalora_mask", {}, s});
  }
  return out;
}

}  // namespace

CheckpointData snapshot(const policy::PolicyNet& net, const ExperimentConfig& cfg) {
  CheckpointData d;
  auto add = [&](const std::string& name, const Matrix& m, bool trainable) {
    d.manifest.push_back({name, m.rows(), m.cols(), d.payload.size() * sizeof(double), trainable ? kTrainable : 0u});
    d.payload.insert(d.payload.end(), m.data().begin(), m.data().end());
  };
  for (const auto& p : net.parameters()) add(p.name, p.var.value(), p.trainable());
  for (const auto* l : net.linears()) {
    if (const auto* s = std::get_if<adapters::AdaLoraState>(&l->state())) {
      Matrix m(s->pruned.size(), 1);
      for (std::size_t i = 0; i < s->pruned.size(); ++i) m[i] = s->pruned[i] ? 1.0 : 0.0;
      add(l->name() + ".adalora_mask", m, false);
    }
  }
  d.config_json = to_json(cfg);
  return d;
}

std::string encode(const CheckpointData& data) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.manifest.size()));
  for (const auto& e : data.manifest) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put<std::uint64_t>(out, e.rows);
    put<std::uint64_t>(out, e.cols);
    put<std::uint64_t>(out, e.offset);
    put<std::uint32_t>(out, e.flags);
  }
  put<std::uint64_t>(out, data.payload.size() * sizeof(double));
  for (double v : data.payload) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  put<std::uint64_t>(out, data.config_json.size());
  out += data.config_json;
  return out;
}

CheckpointData decode(const std::string& bytes) {
  Cursor c(bytes);
  if (c.bytes(4, "magic") != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic (expected PERL)");
  const auto version = c.take<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointData d;
  const auto n = c.take<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    ManifestEntry e;
    e.name = c.bytes(c.take<std::uint32_t>("name length"), "tensor name");
    e.rows = c.take<std::uint64_t>("rows");
    e.cols = c.take<std::uint64_t>("cols");
    e.offset = c.take<std::uint64_t>("offset");
    e.flags = c.take<std::uint32_t>("flags");
    d.manifest.push_back(std::move(e));
  }
  const auto payload_bytes = c.take<std::uint64_t>("payload size");
  if (payload_bytes % sizeof(double) != 0) throw FormatError("checkpoint: payload size not a multiple of 8");
  if (payload_bytes > c.remaining()) throw FormatError("checkpoint truncated while reading payload");
  d.payload.resize(payload_bytes / sizeof(double));
  for (double& v : d.payload) v = std::bit_cast<double>(c.take<std::uint64_t>("payload"));

  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& e : d.manifest) {
    if (e.cols != 0 && e.rows > payload_bytes / sizeof(double) / e.cols) {
      throw FormatError("checkpoint: tensor '" + e.name + "' larger than payload");
    }
    const std::uint64_t len = e.rows * e.cols * sizeof(double);
    if (e.offset % sizeof(double) != 0 || e.offset > payload_bytes || len > payload_bytes - e.offset) {
      throw FormatError("checkpoint: tensor '" + e.name + "' out of payload bounds");
    }
    if (len) spans.emplace_back(e.offset, e.offset + len);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) throw FormatError("checkpoint: overlapping tensors in manifest");
  }
  d.config_json = c.bytes(c.take<std::uint64_t>("config length"), "config");
  if (c.remaining() != 0) throw FormatError("checkpoint: trailing bytes after config");
  return d;
}

void save_checkpoint(const policy::PolicyNet& net, const ExperimentConfig& cfg, const std::filesystem::path& path) {
  write_file(path, encode(snapshot(net, cfg)));
}

LoadedCheckpoint restore(const CheckpointData& data) {
  LoadedCheckpoint out;
  try {
    out.config = parse_config(data.config_json);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: config echo rejected: ") + e.what());
  }
  Rng skeleton(0);
  out.net = std::make_unique<policy::PolicyNet>(out.config.policy, skeleton);
  out.net->attach(out.config.adapter, skeleton);
  const auto targets = slots(*out.net);
  if (targets.size() != data.manifest.size()) {
    throw FormatError("checkpoint: manifest lists " + std::to_string(data.manifest.size()) +
                      " tensors, configuration implies " + std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const ManifestEntry& e = data.manifest[i];
    const Slot& s = targets[i];
    if (e.name != s.name) throw FormatError("checkpoint: expected tensor '" + s.name + "', found '" + e.name + "'");
    const double* src = data.payload.data() + e.offset / sizeof(double);
    if (s.mask) {
      if (e.rows != s.mask->pruned.size() || e.cols != 1) throw FormatError("checkpoint: bad shape for " + e.name);
      for (std::size_t k = 0; k < e.rows; ++k) s.mask->pruned[k] = src[k] != 0.0;
      continue;
    }
    Var v = s.var;
    if (e.rows != v.rows() || e.cols != v.cols()) {
      throw FormatError("checkpoint: tensor '" + e.name + "' is " + std::to_string(e.rows) + "x" +
                        std::to_string(e.cols) + ", expected " + shape_string(v.value()));
    }
    if (((e.flags & kTrainable) != 0) != v.requires_grad()) {
      throw FormatError("checkpoint: trainable flag of '" + e.name + "' disagrees with configuration");
    }
    std::copy(src, src + e.rows * e.cols, v.mutable_value().data().begin());
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) { return restore(decode(read_file(path))); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace rlpeft::harness
