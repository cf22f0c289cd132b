#include "l2l/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "l2l/checkpoint.hpp"
#include "l2l/data_io.hpp"
#include "l2l/error.hpp"
#include "l2l/rng.hpp"

namespace l2l {
namespace {

using nlohmann::json;

// Typed access to one JSON object; remembers the dotted path for messages
// and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error("config: " + where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw Error("config: " + field(key) + " has the wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw Error("config: " + field(key) + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? empty : *it, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw Error("config: unknown key '" + field(it.key().c_str()) + "'");
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "document" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
auto named(const std::string& field, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    throw Error("config: " + field + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(doc, "");
  root.get("seed", c.seed);
  c.train.seed = c.seed;

  {
    Section d = root.child("data");
    DataConfig& dc = c.data;
    d.get("kind", dc.kind);
    d.get("n_train", dc.n_train);
    d.get("n_test", dc.n_test);
    d.get("noise", dc.noise);
    d.get("unit_box", dc.unit_box);
    d.get("box_margin", dc.box_margin);
    d.get("train_images", dc.train_images);
    d.get("train_labels", dc.train_labels);
    d.get("test_images", dc.test_images);
    d.get("test_labels", dc.test_labels);
    d.get("train_file", dc.train_file);
    d.get("test_file", dc.test_file);
    d.get("classes", dc.classes);
    d.get("max_train", dc.max_train);
    d.get("max_test", dc.max_test);
    d.finish();
    if (dc.kind != "two_moons" && dc.kind != "blobs" && dc.kind != "idx" && dc.kind != "cifar")
      throw Error("config: data.kind must be two_moons | blobs | idx | cifar, got '" + dc.kind + "'");
    if (!(dc.noise >= 0.0)) throw Error("config: data.noise must be >= 0");
    if (!(dc.box_margin >= 0.0)) throw Error("config: data.box_margin must be >= 0");
  }
  {
    Section a = root.child("arch");
    ArchSpec& s = c.arch;
    std::string kind = to_string(s.kind), act = to_string(s.activation), norm = to_string(s.norm);
    a.get("kind", kind);
    a.get("widths", s.widths);
    a.get("activation", act);
    a.get("norm", norm);
    c.arch_input_set = a.has("input_shape");
    a.get("input_shape", s.input_shape);
    a.get("classes", s.classes);
    a.get("feature_tap", s.feature_tap);
    a.finish();
    s.kind = named("arch.kind", [&] { return parse_arch_kind(kind); });
    s.activation = named("arch.activation", [&] { return parse_activation(act); });
    s.norm = named("arch.norm", [&] { return parse_norm_kind(norm); });
    if (!a.has("widths") && s.kind == ArchKind::kSmallCnn) s.widths = {16, 32};
  }
  {
    Section t = root.child("train");
    TrainConfig& tc = c.train;
    std::string mode = to_string(tc.mode), variant = to_string(tc.variant);
    t.get("mode", mode);
    t.get("epochs", tc.epochs);
    t.get("batch_size", tc.batch_size);
    {
      Section o = t.child("classifier");
      o.get("lr", tc.classifier.lr);
      o.get("momentum", tc.classifier.momentum);
      o.get("weight_decay", tc.classifier.weight_decay);
      o.get("decay_epochs", tc.classifier.decay_epochs);
      o.get("decay_rate", tc.classifier.decay_rate);
      o.finish();
    }
    {
      Section o = t.child("attacker");
      o.get("lr", tc.attacker.lr);
      o.get("beta1", tc.attacker.beta1);
      o.get("beta2", tc.attacker.beta2);
      o.get("eps", tc.attacker.eps);
      o.get("weight_decay", tc.attacker.weight_decay);
      o.finish();
    }
    t.get("epsilon", tc.epsilon);
    t.get("eta", tc.eta);
    t.get("steps", tc.steps);
    t.get("init_radius", tc.init_radius);
    t.get("epsilon_y", tc.epsilon_y);
    t.get("feature_tap", tc.feature_tap);
    t.get("variant", variant);
    t.get("attacker_width", tc.attacker_width);
    t.get("freeze_attacker", tc.freeze_attacker);
    t.finish();
    tc.mode = named("train.mode", [&] { return parse_train_mode(mode); });
    tc.variant = named("train.variant", [&] { return parse_attacker_variant(variant); });
    tc.validate();
  }
  {
    Section e = root.child("eval");
    EvalConfig& ec = c.eval;
    e.get("epsilon", ec.epsilon);
    e.get("eta", ec.eta);
    e.get("init_radius", ec.init_radius);
    e.get("kappa", ec.kappa);
    e.get("fgsm", ec.fgsm);
    e.get("pgm_steps", ec.pgm_steps);
    e.get("cw_steps", ec.cw_steps);
    e.get("random_samples", ec.random_samples);
    e.get("fast_random_samples", ec.fast_random_samples);
    e.get("fast_max_samples", ec.fast_max_samples);
    e.get("learned_attacker", ec.learned_attacker);
    e.get("sweep_epsilons", ec.sweep_epsilons);
    e.get("sweep_steps", ec.sweep_steps);
    e.get("checklist", ec.checklist);
    e.get("threads", ec.threads);
    e.finish();
    if (!(ec.epsilon >= 0.0)) throw Error("config: eval.epsilon must be >= 0");
    if (ec.epsilon > 0.0 && !(ec.eta > 0.0)) throw Error("config: eval.eta must be > 0");
    if (!(ec.init_radius >= 0.0) || ec.init_radius > ec.epsilon)
      throw Error("config: eval.init_radius must lie in [0, eval.epsilon]");
    for (std::size_t s : ec.pgm_steps)
      if (s == 0) throw Error("config: eval.pgm_steps entries must be >= 1");
    for (std::size_t s : ec.cw_steps)
      if (s == 0) throw Error("config: eval.cw_steps entries must be >= 1");
  }
  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  const DataConfig& d = c.data;
  j["data"] = {{"kind", d.kind},           {"n_train", d.n_train},
               {"n_test", d.n_test},       {"noise", d.noise},
               {"unit_box", d.unit_box},   {"box_margin", d.box_margin},
               {"train_images", d.train_images}, {"train_labels", d.train_labels},
               {"test_images", d.test_images},   {"test_labels", d.test_labels},
               {"train_file", d.train_file},     {"test_file", d.test_file},
               {"classes", d.classes},     {"max_train", d.max_train},
               {"max_test", d.max_test}};
  j["arch"] = json::parse(arch_to_json(c.arch));
  if (!c.arch_input_set) j["arch"].erase("input_shape");
  const TrainConfig& t = c.train;
  j["train"] = {{"mode", to_string(t.mode)},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"classifier",
                 {{"lr", t.classifier.lr},
                  {"momentum", t.classifier.momentum},
                  {"weight_decay", t.classifier.weight_decay},
                  {"decay_epochs", t.classifier.decay_epochs},
                  {"decay_rate", t.classifier.decay_rate}}},
                {"attacker",
                 {{"lr", t.attacker.lr},
                  {"beta1", t.attacker.beta1},
                  {"beta2", t.attacker.beta2},
                  {"eps", t.attacker.eps},
                  {"weight_decay", t.attacker.weight_decay}}},
                {"epsilon", t.epsilon},
                {"eta", t.eta},
                {"steps", t.steps},
                {"init_radius", t.init_radius},
                {"epsilon_y", t.epsilon_y},
                {"feature_tap", t.feature_tap ? json(*t.feature_tap) : json(nullptr)},
                {"variant", to_string(t.variant)},
                {"attacker_width", t.attacker_width},
                {"freeze_attacker", t.freeze_attacker}};
  const EvalConfig& e = c.eval;
  j["eval"] = {{"epsilon", e.epsilon},
               {"eta", e.eta},
               {"init_radius", e.init_radius},
               {"kappa", e.kappa},
               {"fgsm", e.fgsm},
               {"pgm_steps", e.pgm_steps},
               {"cw_steps", e.cw_steps},
               {"random_samples", e.random_samples},
               {"fast_random_samples", e.fast_random_samples},
               {"fast_max_samples", e.fast_max_samples},
               {"learned_attacker", e.learned_attacker},
               {"sweep_epsilons", e.sweep_epsilons},
               {"sweep_steps", e.sweep_steps},
               {"checklist", e.checklist},
               {"threads", e.threads}};
  return j.dump();
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(canonical_config(cfg)); }

DataSplits load_data(const RunConfig& cfg) {
  const DataConfig& d = cfg.data;
  DataSplits s;
  if (d.kind == "two_moons" || d.kind == "blobs") {
    const SynthKind k = parse_synth_kind(d.kind);
    s.train = synth_dataset(k, d.n_train, d.noise, derive_seed(cfg.seed, stream::kData, 0));
    s.test = synth_dataset(k, d.n_test, d.noise, derive_seed(cfg.seed, stream::kData, 1));
    if (d.unit_box) {
      const BoxMap m = fit_unit_box(s.train, d.box_margin);
      s.train = apply_unit_box(s.train, m);
      s.test = apply_unit_box(s.test, m);
      // Gap measured in the coordinates the attacks work in.
      s.clean_gap = min_interclass_linf_gap(apply_unit_box(synth_dataset(k, d.n_train, 0.0, 0), m));
    } else {
      s.clean_gap = min_interclass_linf_gap(synth_dataset(k, d.n_train, 0.0, 0));
    }
  } else if (d.kind == "idx") {
    if (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
        d.test_labels.empty())
      throw Error("config: data.kind idx needs train_images, train_labels, test_images, test_labels");
    s.train = load_idx_dataset(d.train_images, d.train_labels, d.classes);
    s.test = load_idx_dataset(d.test_images, d.test_labels, d.classes);
  } else {
    if (d.train_file.empty() || d.test_file.empty())
      throw Error("config: data.kind cifar needs train_file and test_file");
    s.train = load_cifar_binary(d.train_file, d.classes);
    s.test = load_cifar_binary(d.test_file, d.classes);
  }
  if (d.max_train > 0) s.train = take_evenly(s.train, d.max_train);
  if (d.max_test > 0) s.test = take_evenly(s.test, d.max_test);
  s.train.split = "train";
  s.test.split = "test";
  return s;
}

Dataset take_evenly(const Dataset& data, std::size_t n) {
  const std::size_t total = data.size();
  if (n >= total) return data;
  std::vector<std::size_t> rows(n);
  for (std::size_t k = 0; k < n; ++k) rows[k] = k * total / n;
  return data.subset(rows);
}

void set_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
}

ArchSpec resolve_arch(const RunConfig& cfg, const Dataset& train) {
  ArchSpec a = cfg.arch;
  if (!cfg.arch_input_set) a.input_shape = train.sample_shape();
  if (train.classes() != a.classes)
    throw Error("config: arch.classes is " + std::to_string(a.classes) + " but the data has " +
                std::to_string(train.classes()) + " classes");
  a.validate();
  return a;
}

}  // namespace l2l
