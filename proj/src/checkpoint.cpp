#include "l2l/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"

namespace l2l {
namespace {

using nlohmann::json;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) u64(std::bit_cast<std::uint64_t>(d));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}
  void need(std::size_t n, const char* what) const {
    if (end_ - pos_ < n) throw Error(std::string("checkpoint: truncated ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= std::uint32_t{b_[pos_++]} << s;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= std::uint64_t{b_[pos_++]} << s;
    return v;
  }
  std::vector<double> f64s(const char* what) {
    const std::uint64_t n = u64(what);
    if (n > (end_ - pos_) / 8) throw Error(std::string("checkpoint: truncated ") + what);
    std::vector<double> v(n);
    for (double& d : v) d = std::bit_cast<double>(u64(what));
    return v;
  }
  std::string str(const char* what) {
    const std::uint64_t n = u64(what);
    need(n, what);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n, "header");
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

json arch_json(const ArchSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["widths"] = s.widths;
  j["activation"] = to_string(s.activation);
  j["norm"] = to_string(s.norm);
  j["input_shape"] = s.input_shape;
  j["classes"] = s.classes;
  j["feature_tap"] = s.tap();
  return j;
}

ArchSpec arch_of(const json& j) {
  ArchSpec s;
  s.kind = parse_arch_kind(j.at("kind").get<std::string>());
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.activation = parse_activation(j.at("activation").get<std::string>());
  s.norm = parse_norm_kind(j.at("norm").get<std::string>());
  s.input_shape = j.at("input_shape").get<Shape>();
  s.classes = j.at("classes").get<std::size_t>();
  s.feature_tap = j.at("feature_tap").get<std::size_t>();
  return s;
}

void check_counts(const ParameterSet& ps, const Checkpoint& c, const char* who) {
  if (ps.count() != c.params.size())
    throw Error(std::string(who) + ": checkpoint holds " + std::to_string(c.params.size()) +
                " parameters, network expects " + std::to_string(ps.count()));
  if (ps.buffer_count() != c.buffers.size())
    throw Error(std::string(who) + ": checkpoint holds " + std::to_string(c.buffers.size()) +
                " buffer values, network expects " + std::to_string(ps.buffer_count()));
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(c.version);
  w.u32(static_cast<std::uint32_t>(c.kind));
  w.u64(c.spec_json.size());
  w.bytes(c.spec_json.data(), c.spec_json.size());
  w.u64(c.epoch);
  w.u64(c.config_hash);
  w.f64s(c.params);
  w.f64s(c.buffers);
  w.u32(static_cast<std::uint32_t>(c.optimizer.kind));
  w.u64(c.optimizer.step);
  w.f64s(c.optimizer.m);
  w.f64s(c.optimizer.v);
  w.u64(fnv1a64(w.out.data(), w.out.size()));
  return w.out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& b) {
  if (b.size() < sizeof kCheckpointMagic + 4 + 8)
    throw Error("checkpoint: file too short (" + std::to_string(b.size()) + " bytes)");
  if (std::memcmp(b.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0)
    throw Error("checkpoint: bad magic");
  const std::size_t body = b.size() - 8;
  Reader in(b, body);
  in.skip(sizeof kCheckpointMagic);
  Checkpoint c;
  c.version = in.u32("version");
  if (c.version > kCheckpointVersion)
    throw Error("checkpoint: format version " + std::to_string(c.version) +
                " is newer than supported version " + std::to_string(kCheckpointVersion));
  if (c.version != kCheckpointVersion)
    throw Error("checkpoint: unsupported format version " + std::to_string(c.version));

  std::uint64_t stored = 0;
  for (int s = 0; s < 64; s += 8) stored |= std::uint64_t{b[body + static_cast<std::size_t>(s / 8)]} << s;
  if (stored != fnv1a64(b.data(), body)) throw Error("checkpoint: hash mismatch, file is corrupted");

  const std::uint32_t kind = in.u32("kind");
  if (kind > 1) throw Error("checkpoint: unknown object kind " + std::to_string(kind));
  c.kind = static_cast<CheckpointKind>(kind);
  c.spec_json = in.str("spec");
  c.epoch = in.u64("epoch");
  c.config_hash = in.u64("config hash");
  c.params = in.f64s("parameters");
  c.buffers = in.f64s("buffers");
  const std::uint32_t ok = in.u32("optimizer kind");
  if (ok > 2) throw Error("checkpoint: unknown optimizer kind " + std::to_string(ok));
  c.optimizer.kind = static_cast<OptimizerKind>(ok);
  c.optimizer.step = in.u64("optimizer step");
  c.optimizer.m = in.f64s("optimizer state");
  c.optimizer.v = in.f64s("optimizer state");
  if (in.pos() != body) throw Error("checkpoint: trailing bytes before checksum");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string arch_to_json(const ArchSpec& spec) { return arch_json(spec).dump(); }

ArchSpec arch_from_json(const std::string& text) {
  try {
    return arch_of(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: bad architecture record: ") + e.what());
  }
}

Checkpoint make_checkpoint(const ClassifierNet& net, const OptimizerState& state,
                           std::uint64_t epoch, std::uint64_t config_hash) {
  Checkpoint c;
  c.kind = CheckpointKind::kClassifier;
  c.spec_json = arch_to_json(net.spec());
  c.epoch = epoch;
  c.config_hash = config_hash;
  c.params = net.parameters().flat();
  c.buffers = net.parameters().flat_buffers();
  c.optimizer = state;
  return c;
}

Checkpoint make_checkpoint(const AttackerNet& net, const OptimizerState& state,
                           std::uint64_t epoch, std::uint64_t config_hash) {
  json j;
  j["variant"] = to_string(net.variant());
  j["epsilon"] = net.epsilon();
  j["width"] = net.width();
  j["sample_shape"] = net.sample_shape();
  Checkpoint c;
  c.kind = CheckpointKind::kAttacker;
  c.spec_json = j.dump();
  c.epoch = epoch;
  c.config_hash = config_hash;
  c.params = net.parameters().flat();
  c.buffers = net.parameters().flat_buffers();
  c.optimizer = state;
  return c;
}

void restore_into(ClassifierNet& net, const Checkpoint& c) {
  if (c.kind != CheckpointKind::kClassifier) throw Error("checkpoint: not a classifier");
  check_counts(net.parameters(), c, "checkpoint");
  net.parameters().set_flat(c.params);
  net.parameters().set_flat_buffers(c.buffers);
}

void restore_into(AttackerNet& net, const Checkpoint& c) {
  if (c.kind != CheckpointKind::kAttacker) throw Error("checkpoint: not an attacker");
  check_counts(net.parameters(), c, "checkpoint");
  net.parameters().set_flat(c.params);
  net.parameters().set_flat_buffers(c.buffers);
}

ClassifierNet restore_classifier(const Checkpoint& c) {
  if (c.kind != CheckpointKind::kClassifier) throw Error("checkpoint: not a classifier");
  ClassifierNet net = build_classifier(arch_from_json(c.spec_json), 0);
  restore_into(net, c);
  return net;
}

AttackerNet restore_attacker(const Checkpoint& c) {
  if (c.kind != CheckpointKind::kAttacker) throw Error("checkpoint: not an attacker");
  AttackerNet net = [&] {
    try {
      const json j = json::parse(c.spec_json);
      return build_attacker(parse_attacker_variant(j.at("variant").get<std::string>()),
                            j.at("epsilon").get<double>(), j.at("sample_shape").get<Shape>(),
                            j.at("width").get<double>(), 0);
    } catch (const json::exception& e) {
      throw Error(std::string("checkpoint: bad attacker record: ") + e.what());
    }
  }();
  restore_into(net, c);
  return net;
}

}  // namespace l2l
