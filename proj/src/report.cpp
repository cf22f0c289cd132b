#include "l2l/report.hpp"

#include <cmath>
#include <cctype>
#include <cstdio>

#include "json.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"

namespace l2l {
namespace {

using nlohmann::json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// File names keep letters, digits, '-', '_' and '.'.
std::string file_token(const std::string& name) {
  std::string s;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    s += ok ? c : '_';
  }
  if (s.empty()) throw Error("empty name cannot become a file name");
  return s;
}

std::string as_string(const std::vector<std::uint8_t>& b) { return std::string(b.begin(), b.end()); }

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["clean_accuracy"] = r.clean_accuracy;
  j["robust_accuracy"] = json::object();
  for (const auto& [k, v] : r.robust_accuracy) j["robust_accuracy"][k] = v;
  j["curves"] = json::object();
  for (const auto& [k, c] : r.curves) {
    json pts = json::array();
    for (const auto& [a, v] : c.points) pts.push_back({a, v});
    j["curves"][k] = {{"axis", c.axis}, {"points", pts}};
  }
  j["checklist"] = json::array();
  for (const ChecklistItem& it : r.checklist) {
    json m = json::object();
    for (const auto& [k, v] : it.measured) m[k] = v;
    j["checklist"].push_back({{"name", it.name},
                              {"passed", it.passed},
                              {"skipped", it.skipped},
                              {"measured", m},
                              {"note", it.note}});
  }
  j["seeds"] = r.seeds;
  j["config_hash"] = r.config_hash;
  j["prng"] = r.prng;
  j["mode"] = r.mode;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const json j = json::parse(text);
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    for (auto it = j.at("robust_accuracy").begin(); it != j.at("robust_accuracy").end(); ++it)
      r.robust_accuracy[it.key()] = it->get<double>();
    for (auto it = j.at("curves").begin(); it != j.at("curves").end(); ++it) {
      Curve c;
      c.axis = it->at("axis").get<std::string>();
      for (const json& p : it->at("points")) c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      r.curves[it.key()] = c;
    }
    for (const json& c : j.at("checklist")) {
      ChecklistItem it;
      it.name = c.at("name").get<std::string>();
      it.passed = c.at("passed").get<bool>();
      it.skipped = c.at("skipped").get<bool>();
      it.note = c.at("note").get<std::string>();
      for (auto m = c.at("measured").begin(); m != c.at("measured").end(); ++m)
        it.measured[m.key()] = m->get<double>();
      r.checklist.push_back(it);
    }
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.prng = j.at("prng").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string summary_csv(const EvalReport& r) {
  std::string s = "attack,clean_acc,robust_acc\n";
  for (const auto& [k, v] : r.robust_accuracy)
    s += k + "," + fmt("%.4f", r.clean_accuracy) + "," + fmt("%.4f", v) + "\n";
  return s;
}

std::string curve_csv(const Curve& c) {
  std::string s = "axis_value,robust_accuracy\n";
  for (const auto& [a, v] : c.points) s += fmt("%.17g", a) + "," + fmt("%.17g", v) + "\n";
  return s;
}

void emit_report(const EvalReport& r, const std::filesystem::path& dir) {
  r.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  write_text_atomic(dir / "report.json", report_to_json(r));
  write_text_atomic(dir / "summary.csv", summary_csv(r));
  for (const auto& [k, c] : r.curves)
    write_text_atomic(dir / ("curve_" + file_token(k) + ".csv"), curve_csv(c));
}

std::string trainlog_to_json(const TrainLog& log) {
  json a = json::array();
  for (const EpochRecord& e : log.epochs) {
    json o = {{"epoch", e.epoch}, {"loss", e.loss}, {"clean_accuracy", e.clean_accuracy}};
    if (e.robust_accuracy) o["robust_accuracy"] = *e.robust_accuracy;
    a.push_back(o);
  }
  return json({{"epochs", a}}).dump(2) + "\n";
}

std::string trainlog_csv(const TrainLog& log) {
  std::string s = "epoch,loss,clean_accuracy,seconds\n";
  for (const EpochRecord& e : log.epochs)
    s += std::to_string(e.epoch) + "," + fmt("%.17g", e.loss) + "," +
         fmt("%.17g", e.clean_accuracy) + "," + fmt("%.3f", e.seconds) + "\n";
  return s;
}

std::vector<std::uint8_t> encode_ppm(const PpmImage& img) {
  if (img.rgb.size() != img.width * img.height * 3) throw Error("ppm: pixel buffer size mismatch");
  const std::string head =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

PpmImage decode_ppm(const std::vector<std::uint8_t>& b) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    std::string t;
    while (pos < b.size() && !std::isspace(b[pos])) t += static_cast<char>(b[pos++]);
    if (t.empty()) throw Error("ppm: truncated header");
    return t;
  };
  if (token() != "P6") throw Error("ppm: not a binary P6 image");
  PpmImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") throw Error("ppm: only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw Error("ppm: bad header field");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t n = img.width * img.height * 3;
  if (b.size() < pos || b.size() - pos != n) throw Error("ppm: raster size mismatch");
  img.rgb.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return img;
}

PpmImage read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path)); }

void write_ppm(const PpmImage& img, const std::filesystem::path& path) {
  write_text_atomic(path, as_string(encode_ppm(img)));
}

PpmImage tile_images(const Tensor& batch) {
  if (batch.rank() != 4 || (batch.dim(1) != 1 && batch.dim(1) != 3))
    throw Error("image output needs [N, 1|3, H, W], got " + shape_str(batch.shape()));
  const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  PpmImage img;
  img.width = n * w;
  img.height = h;
  img.rgb.assign(img.width * h * 3, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const std::size_t src = ch < c ? ch : 0;
          double v = batch[((i * c + src) * h + y) * w + x];
          v = std::min(1.0, std::max(0.0, v));
          img.rgb[(y * img.width + i * w + x) * 3 + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
  return img;
}

Tensor difference_image(const Tensor& x, const Tensor& x_adv, double epsilon) {
  if (x.shape() != x_adv.shape()) throw Error("difference image: shape mismatch");
  if (!(epsilon > 0.0)) throw Error("difference image needs epsilon > 0");
  Tensor d(x.shape());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = (x_adv[i] - x[i]) / (2.0 * epsilon) + 0.5;
  return d;
}

void render_perturbation_grid(const Tensor& x, const std::map<std::string, Tensor>& adversarial,
                              double epsilon, const std::filesystem::path& dir) {
  const PpmImage clean = tile_images(x);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  write_ppm(clean, dir / "clean.ppm");
  for (const auto& [name, xa] : adversarial) {
    write_ppm(tile_images(xa), dir / ("adv_" + file_token(name) + ".ppm"));
    write_ppm(tile_images(difference_image(x, xa, epsilon)), dir / ("diff_" + file_token(name) + ".ppm"));
  }
}

}  // namespace l2l
