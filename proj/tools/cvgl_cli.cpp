#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvgl/gradcheck.hpp"
#include "cvgl/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitInvariant = 2;

std::vector<cvgl::CorruptionKind> parse_kinds(const std::string& arg) {
  if (arg == "all") return cvgl::all_corruption_kinds();
  if (arg == "none" || arg.empty()) return {};
  std::vector<cvgl::CorruptionKind> kinds;
  std::size_t pos = 0;
  while (pos <= arg.size()) {
    const auto comma = arg.find(',', pos);
    const std::string token = arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto kind = cvgl::parse_corruption(token);
    if (!kind) throw CLI::ValidationError("--corruptions", "unknown corruption '" + token + "'");
    kinds.push_back(*kind);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return kinds;
}

std::vector<int> parse_severities(const std::string& arg) {
  std::vector<int> out;
  auto push = [&out](const std::string& token) {
    const auto dash = token.find('-');
    if (dash != std::string::npos) {
      const int lo = std::stoi(token.substr(0, dash));
      const int hi = std::stoi(token.substr(dash + 1));
      for (int s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      out.push_back(std::stoi(token));
    }
  };
  std::size_t pos = 0;
  while (pos <= arg.size()) {
    const auto comma = arg.find(',', pos);
    push(arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  for (int s : out) {
    if (s < 1 || s > cvgl::kSeverityLevels) {
      throw CLI::ValidationError("--severities", "severity " + std::to_string(s) + " out of [1,5]");
    }
  }
  return out;
}

void emit_records(const std::vector<std::string>& records, const std::string& path) {
  if (path.empty()) {
    for (const std::string& line : records) std::cout << line << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const std::string& line : records) out << line << "\n";
}

int run_gen(std::uint64_t seed, int scenes, const std::string& dir, const std::string& split,
            const std::string& corruptions, const std::string& severities) {
  std::filesystem::create_directories(dir);
  const cvgl::SceneConfig scene_cfg;
  const auto kinds = parse_kinds(corruptions);
  const auto sevs = parse_severities(severities);
  for (int id = 0; id < scenes; ++id) {
    const cvgl::ScenePair pair = cvgl::generate_pair(seed, id, scene_cfg);
    cvgl::write_ppm(pair.street, dir + "/" + cvgl::ppm_filename(split, id, cvgl::View::street));
    cvgl::write_ppm(pair.satellite, dir + "/" + cvgl::ppm_filename(split, id, cvgl::View::satellite));
    for (const cvgl::CorruptionKind kind : kinds) {
      for (const int sev : sevs) {
        const cvgl::CorruptionSpec spec{kind, sev};
        const cvgl::SceneImage corrupted = cvgl::apply_corruption(pair.street, spec, seed);
        cvgl::write_ppm(corrupted, dir + "/" + cvgl::ppm_filename(split, id, cvgl::View::street, spec));
      }
    }
  }
  std::cout << "wrote " << scenes << " scene pairs to " << dir << "\n";
  return kExitOk;
}

int run_train(const std::string& config_path, std::uint64_t seed, const std::string& out_path) {
  cvgl::TrainConfig cfg = config_path.empty() ? cvgl::TrainConfig{} : cvgl::parse_config_file(config_path);
  cfg.validate();
  cvgl::TrainResult result = cvgl::train_model(cfg, seed, &std::cout);
  cvgl::save_checkpoint(out_path, result.params, cvgl::to_key_values(cfg), seed);
  std::cout << "saved checkpoint to " << out_path << "\n";
  return kExitOk;
}

int run_eval(const std::string& ckpt_path, const std::string& seed_arg, const std::string& corruptions,
             const std::string& severities, const std::string& records_path) {
  const cvgl::CheckpointData data = cvgl::read_checkpoint(ckpt_path);
  const cvgl::TrainConfig cfg = cvgl::config_from_key_values(data.config);
  cvgl::EncoderParams params = cvgl::EncoderParams::init(cfg.encoder, data.seed);
  cvgl::restore_params(params, data);
  const std::uint64_t seed = seed_arg.empty() ? data.seed : std::stoull(seed_arg);

  cvgl::EvalOptions options;
  options.kinds = parse_kinds(corruptions);
  options.severities = parse_severities(severities);
  const cvgl::RobustnessReport report = cvgl::evaluate_robustness(cfg, params, seed, options);
  std::cout << report.table();
  emit_records(report.records(), records_path);
  return kExitOk;
}

int run_ablate(const std::string& matrix_path, std::uint64_t seed, const std::string& records_path) {
  const auto variants = cvgl::parse_ablation_matrix_file(matrix_path);
  const auto outcomes = cvgl::run_ablation(variants, seed, cvgl::full_eval_options(), &std::cout);
  std::cout << cvgl::ablation_table(outcomes);
  if (!records_path.empty()) {
    std::vector<std::string> lines;
    for (const auto& o : outcomes) {
      std::string line = "{\"variant\":\"" + o.name + "\"";
      if (o.ok) {
        line += ",\"clean_r1\":" + cvgl::format_double(o.clean_r1);
        if (o.r1_cor) line += ",\"r1_cor\":" + cvgl::format_double(*o.r1_cor);
      } else {
        line += ",\"error\":\"" + o.error + "\"";
      }
      line += "}";
      lines.push_back(std::move(line));
    }
    emit_records(lines, records_path);
  }
  for (const auto& o : outcomes) {
    if (!o.ok) return kExitValidation;
  }
  return kExitOk;
}

int run_gradcheck(const std::string& module) {
  const auto checks = cvgl::gradcheck_suite(module);
  bool all_ok = true;
  for (const cvgl::GradCheck& check : checks) {
    const bool ok = check.passed();
    all_ok = all_ok && ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << check.name << "  max_rel_err " << check.max_rel_error;
    if (!ok) std::cout << "  worst " << check.worst;
    std::cout << "\n";
  }
  std::cout << (all_ok ? "gradcheck passed" : "gradcheck FAILED") << " (" << checks.size() << " checks)\n";
  return all_ok ? kExitOk : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view geo-localization desk harness"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int scenes = 16;
  std::string out_dir = "scenes";
  std::string split = "gen";
  std::string config_path;
  std::string out_ckpt = "model.ckpt.json";
  std::string ckpt_path;
  std::string seed_arg;
  std::string corruptions = "all";
  std::string severities = "1-5";
  std::string records_path;
  std::string matrix_path;
  std::string module = "all";

  CLI::App* gen = app.add_subcommand("gen", "dump synthetic scene pairs as PPM images");
  gen->add_option("--seed", seed, "global seed");
  gen->add_option("--scenes", scenes, "number of scenes");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--split", split, "filename split prefix");
  std::string gen_corruptions = "none";
  gen->add_option("--corruptions", gen_corruptions, "also dump corrupted street views (all|kind,...|none)");
  gen->add_option("--severities", severities, "severity list for --corruptions (e.g. 1-5 or 1,3)");

  CLI::App* train = app.add_subcommand("train", "train a model and save a checkpoint");
  train->add_option("--config", config_path, "key=value config file (defaults when omitted)");
  train->add_option("--seed", seed, "global seed");
  train->add_option("--out", out_ckpt, "checkpoint path")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the held-out corruption suite");
  eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval->add_option("--seed", seed_arg, "data seed (defaults to the checkpoint's)");
  eval->add_option("--corruptions", corruptions, "all|none|kind,kind,...");
  eval->add_option("--severities", severities, "e.g. 1-5 or 2,4");
  eval->add_option("--records", records_path, "write metric records to this file instead of stdout");

  CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate a matrix of config variants");
  ablate->add_option("--matrix", matrix_path, "ablation matrix file")->required();
  ablate->add_option("--seed", seed, "global seed shared by all variants");
  ablate->add_option("--records", records_path, "write per-variant records to this file");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference gradient suites");
  gradcheck->add_option("--module", module, "all|tensor|sarm|ccm|rgam|loss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return run_gen(seed, scenes, out_dir, split, gen_corruptions, severities);
    if (train->parsed()) return run_train(config_path, seed, out_ckpt);
    if (eval->parsed()) return run_eval(ckpt_path, seed_arg, corruptions, severities, records_path);
    if (ablate->parsed()) return run_ablate(matrix_path, seed, records_path);
    if (gradcheck->parsed()) return run_gradcheck(module);
  } catch (const std::domain_error& e) {
    std::cerr << "invariant failure: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
