#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cvgl/checkpoint.hpp"
#include "cvgl/config.hpp"
#include "cvgl/retrieval.hpp"

namespace cvgl {

/// One optimizer update on a batch of paired views (at least two pairs, so
/// every query has an in-batch negative). Returns the loss value.
double train_step(const std::vector<ScenePair>& batch, const EncoderConfig& encoder_cfg,
                  const LossConfig& loss_cfg, EncoderParams& params, AdamW& optimizer, double lr);

struct TrainResult {
  EncoderParams params;
  std::vector<double> losses;  // one entry per step
};

/// Full seeded run: scenes 0..train_scenes-1, shuffled batches per epoch,
/// warm-up then cosine decay. Pass a stream for per-epoch progress lines.
TrainResult train_model(const TrainConfig& cfg, std::uint64_t seed, std::ostream* log = nullptr);

struct EvalOptions {
  std::vector<CorruptionKind> kinds;      // empty: clean metrics only
  std::vector<int> severities = {1, 2, 3, 4, 5};
  CorruptionTable table;
};

EvalOptions full_eval_options();

/// Retrieval protocol: satellites stay clean and are encoded once; street
/// queries are evaluated clean and under every requested (kind, severity).
/// Held-out scene ids start right after the training range.
RobustnessReport evaluate_robustness(const TrainConfig& cfg, const EncoderParams& params,
                                     std::uint64_t seed, const EvalOptions& options);

struct AblationOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  int descriptor_length = 0;
  double clean_r1 = 0.0;
  std::optional<double> r1_cor;
};

/// Trains and evaluates every variant from the same seed; a failing variant
/// is reported in place without stopping the rest.
std::vector<AblationOutcome> run_ablation(const std::vector<AblationVariant>& variants, std::uint64_t seed,
                                          const EvalOptions& options, std::ostream* log = nullptr);

std::string ablation_table(const std::vector<AblationOutcome>& outcomes);

}  // namespace cvgl
