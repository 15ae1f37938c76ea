#pragma once

#include <string>

#include "mdseg/config.hpp"
#include "mdseg/params.hpp"

namespace mdseg {

struct Checkpoint {
  ExperimentConfig config;  // snapshot; sufficient to re-run evaluation
  ParameterStore<float> params;
};

// Versioned little-endian binary container: magic, format version, the config
// snapshot as JSON, then named float32 arrays in creation order.
void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const ParameterStore<float>& params);

// Errors on unknown magic/version, truncation, or trailing garbage.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mdseg
