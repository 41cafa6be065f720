#include "cvgl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cvgl {

namespace {
constexpr const char* kFormat = "cvgl-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const std::map<std::string, std::string>& config, std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["config"] = config;
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [name, tensor] : named_params(params)) {
    p[name] = {{"shape", tensor.shape()}, {"data", tensor.data()}};
  }
  j["params"] = std::move(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != kFormat || j.value("version", 0) != kVersion) {
    throw std::runtime_error("'" + path + "' is not a version-" + std::to_string(kVersion) + " checkpoint");
  }
  CheckpointData data;
  data.seed = j.at("seed").get<std::uint64_t>();
  data.config = j.at("config").get<std::map<std::string, std::string>>();
  for (const auto& [name, entry] : j.at("params").items()) {
    data.params.emplace_back(
        name, std::make_pair(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>()));
  }
  return data;
}

void restore_params(EncoderParams& params, const CheckpointData& data) {
  std::map<std::string, std::pair<Shape, std::vector<double>>> by_name(data.params.begin(), data.params.end());
  auto named = named_params(params);
  if (by_name.size() != named.size()) {
    throw std::runtime_error("checkpoint/config mismatch: checkpoint has " + std::to_string(by_name.size()) +
                             " parameters, model expects " + std::to_string(named.size()));
  }
  for (auto& [name, tensor] : named) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint/config mismatch: missing parameter '" + name + "'");
    }
    if (it->second.first != tensor.shape()) {
      throw std::runtime_error("checkpoint/config mismatch: '" + name + "' has shape " +
                               shape_str(it->second.first) + ", model expects " + shape_str(tensor.shape()));
    }
    tensor.set_data(it->second.second);
  }
}

}  // namespace cvgl
