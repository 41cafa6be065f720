#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cvgl/encoder.hpp"

namespace cvgl {

/// Raw checkpoint contents: the config echo, the global seed, and every
/// parameter as (dotted name -> shape + row-major values).
struct CheckpointData {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, std::pair<Shape, std::vector<double>>>> params;
};

/// Self-describing JSON archive; serialization is value-exact, so
/// save/load/save round-trips bit-identically.
void save_checkpoint(const std::string& path, const EncoderParams& params,
                     const std::map<std::string, std::string>& config, std::uint64_t seed);

CheckpointData read_checkpoint(const std::string& path);

/// Copies checkpoint values into an already-shaped parameter set; any
/// name or shape mismatch is reported with the offending entry.
void restore_params(EncoderParams& params, const CheckpointData& data);

}  // namespace cvgl
