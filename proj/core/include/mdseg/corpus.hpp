#pragma once

#include <string>
#include <vector>

#include "mdseg/augment.hpp"
#include "mdseg/dataset_io.hpp"
#include "mdseg/projection.hpp"
#include "mdseg/scene_gen.hpp"
#include "mdseg/taxonomy.hpp"

namespace mdseg {

struct DatasetRecipe {
  DatasetTaxonomy taxonomy;
  TaxonomyProjection projection;
  AugmentationPolicy policy;
};

struct CorpusSpec {
  uint64_t seed = 1;
  int train_per_dataset = 500;
  int val_per_dataset = 100;
  GeneratorConfig generator;
  std::vector<DatasetRecipe> datasets;
};

// Three synthetic datasets over one shape vocabulary with deliberately
// conflicting class lists:
//   toyA labels every circle "circle";
//   toyB splits circles into small-circle / large-circle by mask area;
//   toyC calls squares "box" and leaves triangles unannotated.
CorpusSpec standard_corpus();

// Writes <root>/corpus.json plus <root>/{train,val}/<dataset_id>/ trees.
void build_corpus(const CorpusSpec& spec, const std::string& root);

// Loads every dataset of one split in recipe order.
std::vector<LoadedDataset> load_corpus(const std::string& root, const std::string& split);

}  // namespace mdseg
