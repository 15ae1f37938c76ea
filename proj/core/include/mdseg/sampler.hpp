#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mdseg/rng.hpp"

namespace mdseg {

enum class SamplingMode { UniformDatasets, ProportionalToSize };

inline SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "uniform") return SamplingMode::UniformDatasets;
  if (s == "proportional") return SamplingMode::ProportionalToSize;
  throw std::invalid_argument("sampler: unknown mode '" + s + "'");
}

inline const char* to_string(SamplingMode mode) {
  return mode == SamplingMode::UniformDatasets ? "uniform" : "proportional";
}

struct BatchSlot {
  int dataset_index = -1;
  int sample_index = -1;
};

struct TrainingBatch {
  std::vector<BatchSlot> slots;
  std::vector<int> per_dataset_counts;
};

// Each slot draws its dataset (uniformly or by size), then one sample
// uniformly within it.
inline TrainingBatch sample_batch(const std::vector<int>& dataset_sizes, int batch_size,
                                  Rng& rng, SamplingMode mode = SamplingMode::UniformDatasets) {
  if (dataset_sizes.empty()) throw std::invalid_argument("sampler: no datasets");
  if (batch_size < 1) throw std::invalid_argument("sampler: bad batch size");
  int64_t total = 0;
  for (int n : dataset_sizes) {
    if (n < 1) throw std::invalid_argument("sampler: empty dataset");
    total += n;
  }
  const int m = static_cast<int>(dataset_sizes.size());
  TrainingBatch batch;
  batch.per_dataset_counts.assign(static_cast<size_t>(m), 0);
  batch.slots.reserve(static_cast<size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    BatchSlot slot;
    if (mode == SamplingMode::UniformDatasets) {
      slot.dataset_index = rng.uniform_int(0, m - 1);
    } else {
      int64_t pick = static_cast<int64_t>(
          rng.next_below(static_cast<uint32_t>(total)));
      slot.dataset_index = 0;
      while (pick >= dataset_sizes[static_cast<size_t>(slot.dataset_index)]) {
        pick -= dataset_sizes[static_cast<size_t>(slot.dataset_index)];
        ++slot.dataset_index;
      }
    }
    slot.sample_index =
        rng.uniform_int(0, dataset_sizes[static_cast<size_t>(slot.dataset_index)] - 1);
    ++batch.per_dataset_counts[static_cast<size_t>(slot.dataset_index)];
    batch.slots.push_back(slot);
  }
  return batch;
}

}  // namespace mdseg
