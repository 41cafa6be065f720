#pragma once

#include <map>
#include <string>
#include <vector>

#include "cvgl/encoder.hpp"
#include "cvgl/loss.hpp"
#include "cvgl/optim.hpp"

namespace cvgl {

/// Everything a training run needs, round-trippable through the key=value
/// text format (see parse_config_text) and echoed into checkpoints.
struct TrainConfig {
  EncoderConfig encoder;
  LossConfig loss;
  OptimConfig optim;
  SceneConfig scene;
  int train_scenes = 64;
  int eval_scenes = 32;
  int batch = 16;
  int steps = 500;
  int warmup_epochs = 1;

  void validate() const;
  int steps_per_epoch() const;
  int warmup_steps() const { return warmup_epochs * steps_per_epoch(); }
};

/// Canonical text form; parsing the emitted map reproduces the config.
std::map<std::string, std::string> to_key_values(const TrainConfig& cfg);
void apply_key_value(TrainConfig& cfg, const std::string& key, const std::string& value);
TrainConfig config_from_key_values(const std::map<std::string, std::string>& kv);

/// `key = value` lines; '#' starts a comment; blank lines ignored.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

/// Ablation matrix: `[name]` section headers, each followed by key=value
/// overrides applied on top of the keys listed before the first section.
struct AblationVariant {
  std::string name;
  TrainConfig config;
};
std::vector<AblationVariant> parse_ablation_matrix_text(const std::string& text);
std::vector<AblationVariant> parse_ablation_matrix_file(const std::string& path);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace cvgl
