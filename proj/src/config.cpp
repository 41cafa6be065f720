#include "cvgl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cvgl {

void TrainConfig::validate() const {
  encoder.validate();
  scene.validate();
  if (loss.tau <= 0) throw std::invalid_argument("config: tau must be positive");
  if (optim.lr < 0 || optim.weight_decay < 0) throw std::invalid_argument("config: negative optimizer rate");
  if (train_scenes < 2) throw std::invalid_argument("config: need at least 2 training scenes");
  if (eval_scenes < 1) throw std::invalid_argument("config: need at least 1 evaluation scene");
  if (batch < 2) throw std::invalid_argument("config: batch must hold at least 2 pairs");
  if (steps < 0) throw std::invalid_argument("config: negative step count");
  if (warmup_epochs < 0) throw std::invalid_argument("config: negative warmup");
}

int TrainConfig::steps_per_epoch() const {
  const int b = std::min(batch, train_scenes);
  return (train_scenes + b - 1) / b;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_switch(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw std::invalid_argument("config: " + key + " must be on or off, got '" + value + "'");
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + value + "'");
  }
}

const char* ccm_mode_name(CcmMode m) {
  switch (m) {
    case CcmMode::on: return "on";
    case CcmMode::off: return "off";
    case CcmMode::fc: return "fc";
    case CcmMode::variant: return "variant";
  }
  throw std::invalid_argument("unknown ccm mode");
}

}  // namespace

std::map<std::string, std::string> to_key_values(const TrainConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["channels"] = std::to_string(cfg.encoder.channels);
  kv["patch"] = std::to_string(cfg.encoder.patch);
  kv["blocks"] = std::to_string(cfg.encoder.blocks);
  kv["k"] = std::to_string(cfg.encoder.window);
  kv["ccm_kernel"] = std::to_string(cfg.encoder.ccm_kernel);
  kv["ccm_granularity"] = std::to_string(cfg.encoder.ccm_granularity);
  kv["residual"] = cfg.encoder.residual ? "on" : "off";
  kv["sarm"] = cfg.encoder.use_sarm ? "on" : "off";
  kv["ccm"] = ccm_mode_name(cfg.encoder.ccm_mode);
  kv["rgam"] = cfg.encoder.use_rgam ? "on" : "off";
  kv["fusion"] = cfg.encoder.fusion == FusionMode::adaptive
                     ? "adaptive"
                     : format_double(cfg.encoder.ratio_global) + ":" + format_double(cfg.encoder.ratio_local);
  kv["tau"] = format_double(cfg.loss.tau);
  kv["symmetric"] = cfg.loss.symmetric ? "on" : "off";
  kv["lr"] = format_double(cfg.optim.lr);
  kv["weight_decay"] = format_double(cfg.optim.weight_decay);
  kv["batch"] = std::to_string(cfg.batch);
  kv["steps"] = std::to_string(cfg.steps);
  kv["warmup_epochs"] = std::to_string(cfg.warmup_epochs);
  kv["train_scenes"] = std::to_string(cfg.train_scenes);
  kv["eval_scenes"] = std::to_string(cfg.eval_scenes);
  kv["street_h"] = std::to_string(cfg.scene.street_height);
  kv["street_w"] = std::to_string(cfg.scene.street_width);
  kv["sat_h"] = std::to_string(cfg.scene.sat_height);
  kv["sat_w"] = std::to_string(cfg.scene.sat_width);
  return kv;
}

void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "channels") cfg.encoder.channels = parse_int(key, value);
  else if (key == "patch") cfg.encoder.patch = parse_int(key, value);
  else if (key == "blocks") cfg.encoder.blocks = parse_int(key, value);
  else if (key == "k") cfg.encoder.window = parse_int(key, value);
  else if (key == "ccm_kernel") cfg.encoder.ccm_kernel = parse_int(key, value);
  else if (key == "ccm_granularity") cfg.encoder.ccm_granularity = parse_int(key, value);
  else if (key == "residual") cfg.encoder.residual = parse_switch(key, value);
  else if (key == "sarm") cfg.encoder.use_sarm = parse_switch(key, value);
  else if (key == "ccm") {
    if (value == "on") cfg.encoder.ccm_mode = CcmMode::on;
    else if (value == "off") cfg.encoder.ccm_mode = CcmMode::off;
    else if (value == "fc") cfg.encoder.ccm_mode = CcmMode::fc;
    else if (value == "variant") cfg.encoder.ccm_mode = CcmMode::variant;
    else throw std::invalid_argument("config: ccm must be on|off|fc|variant, got '" + value + "'");
  } else if (key == "rgam") cfg.encoder.use_rgam = parse_switch(key, value);
  else if (key == "fusion") {
    if (value == "adaptive") {
      cfg.encoder.fusion = FusionMode::adaptive;
    } else {
      const auto colon = value.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("config: fusion must be adaptive or G:L, got '" + value + "'");
      }
      cfg.encoder.fusion = FusionMode::fixed;
      cfg.encoder.ratio_global = parse_real(key, value.substr(0, colon));
      cfg.encoder.ratio_local = parse_real(key, value.substr(colon + 1));
    }
  } else if (key == "tau") cfg.loss.tau = parse_real(key, value);
  else if (key == "symmetric") cfg.loss.symmetric = parse_switch(key, value);
  else if (key == "lr") cfg.optim.lr = parse_real(key, value);
  else if (key == "weight_decay") cfg.optim.weight_decay = parse_real(key, value);
  else if (key == "batch") cfg.batch = parse_int(key, value);
  else if (key == "steps") cfg.steps = parse_int(key, value);
  else if (key == "warmup_epochs") cfg.warmup_epochs = parse_int(key, value);
  else if (key == "train_scenes") cfg.train_scenes = parse_int(key, value);
  else if (key == "eval_scenes") cfg.eval_scenes = parse_int(key, value);
  else if (key == "street_h") cfg.scene.street_height = parse_int(key, value);
  else if (key == "street_w") cfg.scene.street_width = parse_int(key, value);
  else if (key == "sat_h") cfg.scene.sat_height = parse_int(key, value);
  else if (key == "sat_w") cfg.scene.sat_width = parse_int(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig config_from_key_values(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, value] : kv) apply_key_value(cfg, key, value);
  cfg.validate();
  return cfg;
}

namespace {

// Shared line scanner for config and matrix files. Calls on_section for
// `[name]` lines and on_pair for key=value lines.
void scan_lines(const std::string& text, const std::function<void(const std::string&)>& on_section,
                const std::function<void(const std::string&, const std::string&)>& on_pair) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": malformed section header '" + line + "'");
      }
      if (!on_section) throw std::invalid_argument("line " + std::to_string(lineno) + ": sections not allowed here");
      on_section(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    on_pair(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  scan_lines(text, nullptr, [&](const std::string& k, const std::string& v) { apply_key_value(cfg, k, v); });
  cfg.validate();
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) { return parse_config_text(read_file(path)); }

std::vector<AblationVariant> parse_ablation_matrix_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> base;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;
  scan_lines(
      text, [&](const std::string& name) { sections.emplace_back(name, base); },
      [&](const std::string& k, const std::string& v) {
        if (sections.empty()) base.emplace_back(k, v);
        else sections.back().second.emplace_back(k, v);
      });
  if (sections.empty()) throw std::invalid_argument("ablation matrix has no [variant] sections");
  std::vector<AblationVariant> variants;
  for (auto& [name, pairs] : sections) {
    TrainConfig cfg;
    for (auto& [k, v] : pairs) apply_key_value(cfg, k, v);
    cfg.validate();
    variants.push_back(AblationVariant{name, std::move(cfg)});
  }
  return variants;
}

std::vector<AblationVariant> parse_ablation_matrix_file(const std::string& path) {
  return parse_ablation_matrix_text(read_file(path));
}

}  // namespace cvgl
