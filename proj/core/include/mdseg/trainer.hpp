#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdseg/checkpoint.hpp"
#include "mdseg/config.hpp"
#include "mdseg/corpus.hpp"
#include "mdseg/model.hpp"
#include "mdseg/optimizer.hpp"
#include "mdseg/text_encoder.hpp"

namespace mdseg {

// Pixel intensities [0, 255] mapped to [-1, 1].
template <typename T>
Array<T> image_to_input(const ArrayU8& image) {
  Array<T> out(image.shape);
  for (size_t i = 0; i < image.numel(); ++i)
    out[i] = static_cast<T>((image[i] - 127.5) / 127.5);
  return out;
}

struct StepRecord {
  int step = 0;
  double lr = 0;
  double total = 0, contrastive = 0, focal = 0, dice = 0;  // summed over the batch
  int matched = 0;  // matched ground-truth instances in the batch
};

// Fixed-format JSON line (no timestamps, full-precision floats) so equal runs
// produce byte-identical logs and parsed values match the computed ones.
std::string step_record_line(const StepRecord& rec);

struct NonFiniteLossError : std::runtime_error {
  explicit NonFiniteLossError(StepRecord rec)
      : std::runtime_error("training aborted: non-finite loss at step " +
                           std::to_string(rec.step)),
        record(rec) {}
  StepRecord record;
};

// Owns everything one training run needs: the train split, taxonomy registry,
// frozen text encoder, model parameters, and optimizer state.
class TrainSession {
 public:
  explicit TrainSession(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const SegModel<float>& model() const { return model_; }
  ParameterStore<float>& params() { return store_; }
  const ParameterStore<float>& params() const { return store_; }
  const FrozenTextEncoder<float>& encoder() const { return encoder_; }
  const TaxonomyRegistry& registry() const { return registry_; }
  const std::vector<LoadedDataset>& datasets() const { return train_; }
  int steps_done() const { return step_; }

  // One batch: sample, augment, per-sample forward/match/loss/backward,
  // gradient accumulation, AdamW update under the poly schedule. Throws
  // NonFiniteLossError before touching parameters if the loss diverged.
  StepRecord step();

 private:
  ExperimentConfig cfg_;
  std::vector<LoadedDataset> train_;
  std::vector<int> sizes_;
  TaxonomyRegistry registry_;
  SyntheticTextEncoder<float> encoder_;
  SegModel<float> model_;
  ParameterStore<float> store_;
  AdamW<float> opt_;
  Rng sampler_rng_, augment_rng_;
  int step_ = 0;
};

// Filters a corpus split to the configured dataset subset (corpus order is
// kept; empty subset means all datasets). Errors on ids missing from the
// corpus.
std::vector<LoadedDataset> load_split(const ExperimentConfig& cfg, const std::string& split);

// Full run: truncates the log, appends one record per step, saves the final
// checkpoint. On non-finite loss writes a diagnostic record and rethrows.
void run_training(const ExperimentConfig& cfg, std::ostream* echo = nullptr);

}  // namespace mdseg
