// Copyright 2026 The mvprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "mvp/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T out{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ValidationError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError("config: '" + key + "' expects true or false, got '" + text + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, ptr);
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(const char* key, T TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return std::to_string(c.*member); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

Field double_field(const char* key, double TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return format_double(c.*member); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_number<double>(key, v); }};
}

Field bool_field(const char* key, bool TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](TrainConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

Field path_field(const char* key, std::filesystem::path TrainConfig::*member) {
  return {key, [member](const TrainConfig& c) { return (c.*member).string(); },
          [member](TrainConfig& c, const std::string& v) { c.*member = v; }};
}

Field angle_field(const char* key, double Interval::*end, Interval RotationSpec::*which) {
  return {key, [=](const TrainConfig& c) { return format_double(c.rotation.*which.*end); },
          [=](TrainConfig& c, const std::string& v) { c.rotation.*which.*end = parse_number<double>(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"dataset", [](const TrainConfig& c) { return to_string(c.dataset); },
                 [](TrainConfig& c, const std::string& v) { c.dataset = parse_dataset_kind(v); }});
    f.push_back(path_field("data_root", &TrainConfig::data_root));
    f.push_back(size_field("n_points", &TrainConfig::n_points));
    f.push_back({"synthetic_classes", [](const TrainConfig& c) { return std::to_string(c.synthetic.classes); },
                 [](TrainConfig& c, const std::string& v) {
                   c.synthetic.classes = parse_number<std::size_t>("synthetic_classes", v);
                 }});
    f.push_back({"synthetic_per_class", [](const TrainConfig& c) { return std::to_string(c.synthetic.per_class); },
                 [](TrainConfig& c, const std::string& v) {
                   c.synthetic.per_class = parse_number<std::size_t>("synthetic_per_class", v);
                 }});
    f.push_back({"synthetic_test_fraction",
                 [](const TrainConfig& c) { return format_double(c.synthetic.test_fraction); },
                 [](TrainConfig& c, const std::string& v) {
                   c.synthetic.test_fraction = parse_number<double>("synthetic_test_fraction", v);
                 }});
    f.push_back({"synthetic_jitter", [](const TrainConfig& c) { return format_double(c.synthetic.jitter); },
                 [](TrainConfig& c, const std::string& v) {
                   c.synthetic.jitter = parse_number<double>("synthetic_jitter", v);
                 }});
    f.push_back(size_field("shots", &TrainConfig::shots));
    f.push_back(size_field("views", &TrainConfig::views));
    f.push_back({"mode", [](const TrainConfig& c) { return to_string(c.mode); },
                 [](TrainConfig& c, const std::string& v) { c.mode = parse_fusion_mode(v); }});
    f.push_back({"backbone", [](const TrainConfig& c) { return c.backbone; },
                 [](TrainConfig& c, const std::string& v) { c.backbone = v; }});
    f.push_back(path_field("backbone_weights", &TrainConfig::backbone_weights));
    f.push_back(size_field("c1", &TrainConfig::c1));
    f.push_back(size_field("c2", &TrainConfig::c2));
    f.push_back(size_field("k_neighbors", &TrainConfig::k_neighbors));
    f.push_back(size_field("grid", &TrainConfig::grid));
    f.push_back(size_field("tokenizer_kernel", &TrainConfig::tokenizer_kernel));
    f.push_back(size_field("tokenizer_stride", &TrainConfig::tokenizer_stride));
    f.push_back(bool_field("attention_residual", &TrainConfig::attention_residual));
    f.push_back(bool_field("standardize_prompts", &TrainConfig::standardize_prompts));
    f.push_back(double_field("lr", &TrainConfig::lr));
    f.push_back(double_field("lr_min", &TrainConfig::lr_min));
    f.push_back(double_field("weight_decay", &TrainConfig::weight_decay));
    f.push_back(size_field("epochs", &TrainConfig::epochs));
    f.push_back(size_field("batch_size", &TrainConfig::batch_size));
    f.push_back(size_field("seed", &TrainConfig::seed));
    f.push_back(angle_field("alpha_min", &Interval::lo, &RotationSpec::alpha));
    f.push_back(angle_field("alpha_max", &Interval::hi, &RotationSpec::alpha));
    f.push_back(angle_field("beta_min", &Interval::lo, &RotationSpec::beta));
    f.push_back(angle_field("beta_max", &Interval::hi, &RotationSpec::beta));
    f.push_back(size_field("tta_votes", &TrainConfig::tta_votes));
    f.push_back(bool_field("select_best", &TrainConfig::select_best));
    f.push_back(path_field("output_dir", &TrainConfig::output_dir));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(n_points, "n_points");
  positive(shots, "shots");
  positive(views, "views");
  positive(c1, "c1");
  positive(c2, "c2");
  positive(k_neighbors, "k_neighbors");
  positive(grid, "grid");
  positive(tokenizer_kernel, "tokenizer_kernel");
  positive(tokenizer_stride, "tokenizer_stride");
  positive(epochs, "epochs");
  positive(batch_size, "batch_size");
  positive(tta_votes, "tta_votes");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("config: lr must be positive");
  if (!(lr_min >= 0.0) || lr_min > lr) throw ValidationError("config: lr_min must be in [0, lr]");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ValidationError("config: weight_decay must be non-negative");
  }
  if (k_neighbors >= n_points) throw ValidationError("config: k_neighbors must be smaller than n_points");
  if (mode != FusionMode::baseline && views < 2) {
    throw ValidationError("config: mode " + to_string(mode) + " fuses across views and needs views >= 2");
  }
  rotation.validate();
}

ModelConfig TrainConfig::model_config(std::size_t num_classes) const {
  ModelConfig m;
  m.num_classes = num_classes;
  m.views = views;
  m.grid = grid;
  m.k_neighbors = k_neighbors;
  m.fusion.c1 = c1;
  m.fusion.c2 = c2;
  m.fusion.tokenizer_kernel = tokenizer_kernel;
  m.fusion.tokenizer_stride = tokenizer_stride;
  m.fusion.attention_residual = attention_residual;
  m.fusion.standardize_prompts = standardize_prompts;
  m.mode = mode;
  m.backbone = backbone;
  if (!backbone_weights.empty()) m.backbone_weights = backbone_weights;
  m.seed = seed;
  return m;
}

std::filesystem::path TrainConfig::resolved_data_root() const {
  if (!data_root.empty()) return data_root;
  if (const char* env = std::getenv("MVP_DATA_ROOT")) return env;
  return {};
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, trim(value));
}

std::string get_config_value(const TrainConfig& cfg, const std::string& key) { return field(key).get(cfg); }

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::move(base));
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace mvp
