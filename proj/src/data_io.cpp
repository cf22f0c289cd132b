#include "l2l/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "l2l/error.hpp"
#include "l2l/rng.hpp"

namespace l2l {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error("read failed: " + path.string());
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

IdxArray parse_idx(const std::vector<std::uint8_t>& f) {
  if (f.size() < 4) throw Error("idx: truncated header (" + std::to_string(f.size()) + " bytes)");
  if (f[0] != 0 || f[1] != 0) throw Error("idx: bad magic, first two bytes must be zero");
  if (f[2] != 0x08) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "idx: unsupported type byte 0x%02x (only 0x08 unsigned byte)", f[2]);
    throw Error(buf);
  }
  const std::size_t dims = f[3];
  const std::size_t header = 4 + 4 * dims;
  if (f.size() < header)
    throw Error("idx: truncated header, " + std::to_string(dims) + " extents need " +
                std::to_string(header) + " bytes, file has " + std::to_string(f.size()));
  IdxArray a;
  std::size_t count = 1;
  for (std::size_t d = 0; d < dims; ++d) {
    const std::size_t o = 4 + 4 * d;
    const std::size_t e = (std::size_t{f[o]} << 24) | (std::size_t{f[o + 1]} << 16) |
                          (std::size_t{f[o + 2]} << 8) | std::size_t{f[o + 3]};
    a.shape.push_back(e);
    count *= e;
  }
  if (f.size() - header < count)
    throw Error("idx: truncated data, expected " + std::to_string(count) + " bytes, found " +
                std::to_string(f.size() - header));
  if (f.size() - header > count)
    throw Error("idx: " + std::to_string(f.size() - header - count) + " trailing bytes");
  a.bytes.assign(f.begin() + static_cast<std::ptrdiff_t>(header), f.end());
  return a;
}

IdxArray read_idx_bytes(const std::filesystem::path& path) {
  try {
    return parse_idx(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_idx(const IdxArray& a) {
  if (a.shape.size() > 255) throw Error("idx: too many dimensions");
  if (shape_numel(a.shape) != a.bytes.size()) throw Error("idx: extents do not match payload");
  std::vector<std::uint8_t> f{0, 0, 0x08, static_cast<std::uint8_t>(a.shape.size())};
  for (std::size_t e : a.shape) {
    if (e > 0xffffffffULL) throw Error("idx: extent too large");
    for (int s = 24; s >= 0; s -= 8) f.push_back(static_cast<std::uint8_t>((e >> s) & 0xff));
  }
  f.insert(f.end(), a.bytes.begin(), a.bytes.end());
  return f;
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  write_file_atomic(path, encode_idx(a));
}

Tensor load_idx(const std::filesystem::path& path) {
  const IdxArray a = read_idx_bytes(path);
  Tensor t(a.shape);
  for (std::size_t i = 0; i < a.bytes.size(); ++i) t[i] = static_cast<double>(a.bytes[i]) / 255.0;
  return t;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes) {
  Tensor x = load_idx(images);
  const IdxArray l = read_idx_bytes(labels);
  if (l.shape.size() != 1) throw Error("idx: labels must be one-dimensional");
  if (x.rank() == 3) x = x.reshaped({x.dim(0), 1, x.dim(1), x.dim(2)});
  if (x.rank() != 4) throw Error("idx: images must be [n, H, W] or [n, C, H, W]");
  if (x.dim(0) != l.shape[0]) throw Error("idx: image and label counts differ");
  std::vector<std::size_t> idx(l.bytes.begin(), l.bytes.end());
  Dataset d;
  d.inputs = std::move(x);
  d.labels = one_hot(idx, classes);
  d.domain = Domain{0.0, 1.0};
  return d;
}

Dataset parse_cifar_binary(const std::vector<std::uint8_t>& f, std::size_t classes) {
  if (f.size() % kCifarRecord != 0)
    throw Error("cifar: file size " + std::to_string(f.size()) + " is not a multiple of " +
                std::to_string(kCifarRecord));
  const std::size_t n = f.size() / kCifarRecord;
  Dataset d;
  d.inputs = Tensor({n, 3, 32, 32});
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* r = f.data() + i * kCifarRecord;
    labels[i] = r[0];
    for (std::size_t k = 0; k < 3072; ++k) d.inputs[i * 3072 + k] = static_cast<double>(r[1 + k]) / 255.0;
  }
  d.labels = one_hot(labels, classes);
  d.domain = Domain{0.0, 1.0};
  return d;
}

Dataset load_cifar_binary(const std::filesystem::path& path, std::size_t classes) {
  try {
    return parse_cifar_binary(read_file_bytes(path), classes);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string to_string(SynthKind k) { return k == SynthKind::kBlobs ? "blobs" : "two_moons"; }

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "blobs") return SynthKind::kBlobs;
  if (s == "two_moons") return SynthKind::kTwoMoons;
  throw Error("unknown synthetic dataset '" + s + "' (expected blobs | two_moons)");
}

Dataset synth_dataset(SynthKind kind, std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw Error("synth: need at least 2 samples");
  if (!(noise >= 0.0)) throw Error("synth: noise must be >= 0");
  const std::size_t n0 = (n + 1) / 2, n1 = n - n0;
  Rng rng(derive_seed(seed, stream::kData));
  Dataset d;
  d.inputs = Tensor({n, 2});
  std::vector<std::size_t> labels(n);
  auto at = [](std::size_t i, std::size_t m) {
    return m > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(m - 1) : 0.0;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = i < n0;
    labels[i] = first ? 0 : 1;
    double px, py;
    if (kind == SynthKind::kBlobs) {
      px = first ? -1.5 : 1.5;
      py = 0.0;
    } else if (first) {
      const double t = at(i, n0);
      px = std::cos(t);
      py = std::sin(t);
    } else {
      const double t = at(i - n0, n1);
      px = 1.0 - std::cos(t);
      py = 0.5 - std::sin(t);
    }
    if (noise > 0.0) {
      px += noise * rng.normal();
      py += noise * rng.normal();
    }
    d.inputs[2 * i] = px;
    d.inputs[2 * i + 1] = py;
  }
  d.labels = one_hot(labels, 2);
  return d;
}

double min_interclass_linf_gap(const Dataset& data) {
  const std::vector<std::size_t> labels = data.label_indices();
  const std::size_t n = data.size(), row = data.inputs.row_size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (labels[i] == labels[j]) continue;
      double m = 0.0;
      for (std::size_t k = 0; k < row; ++k)
        m = std::max(m, std::abs(data.inputs[i * row + k] - data.inputs[j * row + k]));
      best = std::min(best, m);
    }
  }
  return best;
}

BoxMap fit_unit_box(const Dataset& data, double margin) {
  if (data.size() == 0) throw Error("fit_unit_box: empty dataset");
  const std::size_t row = data.inputs.row_size();
  BoxMap m;
  m.lo.assign(row, std::numeric_limits<double>::infinity());
  std::vector<double> hi(row, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < row; ++k) {
      m.lo[k] = std::min(m.lo[k], data.inputs[i * row + k]);
      hi[k] = std::max(hi[k], data.inputs[i * row + k]);
    }
  }
  m.scale.resize(row);
  for (std::size_t k = 0; k < row; ++k) {
    const double range = std::max(hi[k] - m.lo[k], 1e-12);
    m.lo[k] -= margin * range;
    m.scale[k] = 1.0 / (range * (1.0 + 2.0 * margin));
  }
  return m;
}

Dataset apply_unit_box(const Dataset& data, const BoxMap& map) {
  const std::size_t row = data.inputs.row_size();
  if (map.lo.size() != row) throw Error("apply_unit_box: feature count mismatch");
  Dataset d = data;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < row; ++k) {
      double& v = d.inputs[i * row + k];
      v = std::clamp((v - map.lo[k]) * map.scale[k], 0.0, 1.0);
    }
  }
  d.domain = Domain{0.0, 1.0};
  return d;
}

}  // namespace l2l
