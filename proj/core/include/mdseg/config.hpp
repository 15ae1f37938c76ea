#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdseg/augment.hpp"
#include "mdseg/inference.hpp"
#include "mdseg/losses.hpp"
#include "mdseg/model.hpp"
#include "mdseg/optimizer.hpp"
#include "mdseg/sampler.hpp"

namespace mdseg {

struct PathsConfig {
  std::string checkpoint = "checkpoint.bin";
  std::string log = "train_log.jsonl";
  std::string reports = "reports";
};

// One run, fully described: data location and dataset subset, augmentation
// policies, model dims, loss terms, optimizer schedule, inference thresholds,
// seeds and output paths.
struct ExperimentConfig {
  uint64_t seed = 1;
  uint64_t text_seed = 9001;  // fixes the frozen encoder's vectors
  std::string data_root = "corpus";
  std::vector<std::string> datasets;  // subset of the corpus; empty = all
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  InferenceConfig inference;
  SamplingMode sampling = SamplingMode::UniformDatasets;
  PolicySet augment;  // per-dataset training transforms
  PathsConfig paths;

  void validate() const;
};

// Crop/scale/flip/jitter settings for the three shipped datasets.
PolicySet standard_policies();

// Defaults: standard policies, toy model dims, paper optimizer settings.
ExperimentConfig default_config();

// Canonical JSON round trip. parse accepts partial documents: absent keys
// keep their defaults; unknown keys are an error.
std::string config_json(const ExperimentConfig& cfg);
ExperimentConfig parse_config_json(const std::string& text);

// Applies "dotted.path=value" assignments on top of a JSON document; values
// parse as JSON when possible, otherwise as strings.
std::string apply_config_overrides(const std::string& text,
                                   const std::vector<std::string>& sets);

// Reads a config file and applies --set overrides.
ExperimentConfig load_config_file(const std::string& path,
                                  const std::vector<std::string>& sets = {});

}  // namespace mdseg
