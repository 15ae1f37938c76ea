#pragma once

#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/ground_truth.hpp"
#include "mdseg/taxonomy.hpp"

namespace mdseg {

struct DatasetSample {
  ArrayU8 image;  // (3, H, W)
  GroundTruthSet gt;
};

struct LoadedDataset {
  DatasetTaxonomy taxonomy;
  std::vector<DatasetSample> samples;

  const std::string& dataset_id() const { return taxonomy.dataset_id; }
  int size() const { return static_cast<int>(samples.size()); }
};

// Directory layout: <dir>/manifest.json, <dir>/taxonomy.txt, <dir>/images/*.png,
// <dir>/masks/*.png (one grayscale file per instance, 255 = foreground).
void write_dataset(const std::string& dir, const DatasetTaxonomy& taxonomy,
                   const std::vector<DatasetSample>& samples);
LoadedDataset load_dataset(const std::string& dir);

}  // namespace mdseg
