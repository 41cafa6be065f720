#include "cvgl/harness.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cvgl/loss.hpp"
#include "cvgl/rng.hpp"

namespace cvgl {

double train_step(const std::vector<ScenePair>& batch, const EncoderConfig& encoder_cfg,
                  const LossConfig& loss_cfg, EncoderParams& params, AdamW& optimizer, double lr) {
  if (batch.size() < 2) {
    throw std::invalid_argument("train_step: need at least 2 pairs for in-batch negatives, got " +
                                std::to_string(batch.size()));
  }
  optimizer.zero_grad();
  double loss_value = 0.0;
  {
    Tape tape;
    std::vector<Descriptor> street, satellite;
    street.reserve(batch.size());
    satellite.reserve(batch.size());
    for (const ScenePair& pair : batch) {
      street.push_back(encode(pair.street, encoder_cfg, params));
      satellite.push_back(encode(pair.satellite, encoder_cfg, params));
    }
    Tensor loss = batch_info_nce(street, satellite, loss_cfg);
    loss_value = loss.value();
    tape.backward(loss);
  }
  optimizer.step(lr);
  return loss_value;
}

TrainResult train_model(const TrainConfig& cfg, std::uint64_t seed, std::ostream* log) {
  cfg.validate();

  std::vector<ScenePair> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.train_scenes));
  for (int id = 0; id < cfg.train_scenes; ++id) scenes.push_back(generate_pair(seed, id, cfg.scene));

  TrainResult result{EncoderParams::init(cfg.encoder, seed), {}};
  AdamW optimizer(named_params(result.params), cfg.optim);
  const CosineSchedule schedule{cfg.optim.lr, 0.0, cfg.warmup_steps(), cfg.steps};

  const int batch_size = std::min(cfg.batch, cfg.train_scenes);
  int step = 0, epoch = 0;
  while (step < cfg.steps) {
    std::vector<int> order(static_cast<std::size_t>(cfg.train_scenes));
    for (int i = 0; i < cfg.train_scenes; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng shuffle_rng(derive_seed(seed, "epoch", static_cast<std::uint64_t>(epoch)));
    for (int i = cfg.train_scenes - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_loss = 0.0;
    int epoch_steps = 0;
    for (int start = 0; start + 2 <= cfg.train_scenes && step < cfg.steps; start += batch_size) {
      std::vector<ScenePair> batch;
      for (int i = start; i < std::min(start + batch_size, cfg.train_scenes); ++i) {
        batch.push_back(scenes[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      }
      if (batch.size() < 2) break;  // trailing singleton has no negative
      const double loss =
          train_step(batch, cfg.encoder, cfg.loss, result.params, optimizer, schedule.lr_at(step));
      result.losses.push_back(loss);
      epoch_loss += loss;
      ++epoch_steps;
      ++step;
    }
    if (log && epoch_steps > 0) {
      (*log) << "epoch " << epoch << " step " << step << "/" << cfg.steps << " loss "
             << std::fixed << std::setprecision(4) << epoch_loss / epoch_steps << "\n";
    }
    ++epoch;
  }
  return result;
}

EvalOptions full_eval_options() {
  EvalOptions options;
  options.kinds = all_corruption_kinds();
  return options;
}

RobustnessReport evaluate_robustness(const TrainConfig& cfg, const EncoderParams& params,
                                     std::uint64_t seed, const EvalOptions& options) {
  cfg.validate();
  params.validate(cfg.encoder);
  for (int sev : options.severities) {
    if (sev < 1 || sev > kSeverityLevels) {
      throw std::invalid_argument("evaluate: severity " + std::to_string(sev) + " out of range");
    }
  }

  std::vector<ScenePair> held_out;
  held_out.reserve(static_cast<std::size_t>(cfg.eval_scenes));
  for (int i = 0; i < cfg.eval_scenes; ++i) {
    held_out.push_back(generate_pair(seed, cfg.train_scenes + i, cfg.scene));
  }

  // References are encoded once and reused across the whole sweep.
  std::vector<Tensor> refs;
  refs.reserve(held_out.size());
  std::vector<int> gt;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    refs.push_back(encode(held_out[i].satellite, cfg.encoder, params).values);
    gt.push_back(static_cast<int>(i));
  }

  auto query_r1 = [&](const std::optional<CorruptionSpec>& spec) {
    std::vector<Tensor> queries;
    queries.reserve(held_out.size());
    for (const ScenePair& pair : held_out) {
      const SceneImage img =
          spec ? apply_corruption(pair.street, *spec, seed, options.table) : pair.street;
      queries.push_back(encode(img, cfg.encoder, params).values);
    }
    return rank_by_distance(queries, refs, gt);
  };

  RobustnessReport report;
  report.num_queries = cfg.eval_scenes;
  report.num_refs = cfg.eval_scenes;
  const RetrievalResult clean = query_r1(std::nullopt);
  report.clean_r1 = recall_at_k(clean, 1);
  report.clean_r5 = recall_at_k(clean, std::min(5, report.num_refs));
  report.clean_r10 = recall_at_k(clean, std::min(10, report.num_refs));
  report.clean_r1pct = recall_at_k(clean, top_percent_k(report.num_refs));

  if (!options.kinds.empty() && !options.severities.empty()) {
    double kind_sum = 0.0;
    for (CorruptionKind kind : options.kinds) {
      KindReport kr;
      kr.kind = kind;
      double sev_sum = 0.0;
      for (int sev : options.severities) {
        const double r1 = recall_at_k(query_r1(CorruptionSpec{kind, sev}), 1);
        kr.severity_r1.emplace_back(sev, r1);
        sev_sum += r1;
      }
      kr.average_r1 = sev_sum / static_cast<double>(options.severities.size());
      kind_sum += kr.average_r1;
      report.kinds.push_back(std::move(kr));
    }
    report.r1_cor = kind_sum / static_cast<double>(options.kinds.size());
  }
  return report;
}

std::vector<AblationOutcome> run_ablation(const std::vector<AblationVariant>& variants, std::uint64_t seed,
                                          const EvalOptions& options, std::ostream* log) {
  std::vector<AblationOutcome> outcomes;
  for (const AblationVariant& variant : variants) {
    AblationOutcome outcome;
    outcome.name = variant.name;
    try {
      if (log) (*log) << "[" << variant.name << "] training\n";
      TrainResult trained = train_model(variant.config, seed, log);
      RobustnessReport report = evaluate_robustness(variant.config, trained.params, seed, options);
      outcome.ok = true;
      outcome.descriptor_length = variant.config.encoder.descriptor_length();
      outcome.clean_r1 = report.clean_r1;
      outcome.r1_cor = report.r1_cor;
    } catch (const std::exception& e) {
      outcome.ok = false;
      outcome.error = e.what();
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

std::string ablation_table(const std::vector<AblationOutcome>& outcomes) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "variant" << std::setw(8) << "dim" << std::setw(12) << "clean R@1"
     << "R@1_cor\n";
  for (const AblationOutcome& o : outcomes) {
    os << std::left << std::setw(20) << o.name;
    if (!o.ok) {
      os << "error: " << o.error << "\n";
      continue;
    }
    os << std::setw(8) << o.descriptor_length << std::setw(12) << std::fixed << std::setprecision(4)
       << o.clean_r1;
    if (o.r1_cor) os << std::fixed << std::setprecision(4) << *o.r1_cor;
    else os << "-";
    os << "\n";
  }
  return os.str();
}

}  // namespace cvgl
