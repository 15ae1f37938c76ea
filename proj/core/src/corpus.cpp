#include "mdseg/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace mdseg {

// Raster areas for the generator's radius range [5, 12] jump from ~197
// (r = 8) to ~253 (r = 9); 227 splits the two size groups cleanly.
CorpusSpec standard_corpus() {
  CorpusSpec spec;

  DatasetRecipe a;
  a.taxonomy = DatasetTaxonomy("toyA", {"circle", "square", "triangle"});
  a.projection.dataset_id = "toyA";
  a.projection.rules = {
      {"circle", ProjectionRule::keep("circle")},
      {"square", ProjectionRule::keep("square")},
      {"triangle", ProjectionRule::keep("triangle")},
  };
  a.policy = {"toyA", 64, 64, 1.0, 1.25, 0.5, 0.1};

  DatasetRecipe b;
  b.taxonomy =
      DatasetTaxonomy("toyB", {"small-circle", "large-circle", "square", "triangle"});
  b.projection.dataset_id = "toyB";
  b.projection.rules = {
      {"circle", ProjectionRule::split(227, "small-circle", "large-circle")},
      {"square", ProjectionRule::keep("square")},
      {"triangle", ProjectionRule::keep("triangle")},
  };
  b.policy = {"toyB", 48, 96, 1.5, 1.8, 0.5, 0.1};

  DatasetRecipe c;
  c.taxonomy = DatasetTaxonomy("toyC", {"circle", "box"});
  c.projection.dataset_id = "toyC";
  c.projection.rules = {
      {"circle", ProjectionRule::keep("circle")},
      {"square", ProjectionRule::keep("box")},
      {"triangle", ProjectionRule::drop()},
  };
  c.policy = {"toyC", 56, 56, 1.0, 1.4, 0.0, 0.25};

  spec.datasets = {a, b, c};
  return spec;
}

void build_corpus(const CorpusSpec& spec, const std::string& root) {
  if (spec.datasets.empty()) throw std::invalid_argument("corpus: no datasets");
  if (spec.train_per_dataset < 1 || spec.val_per_dataset < 1)
    throw std::invalid_argument("corpus: bad sample counts");
  spec.generator.validate();
  fs::create_directories(root);

  json top;
  top["seed"] = spec.seed;
  top["train_per_dataset"] = spec.train_per_dataset;
  top["val_per_dataset"] = spec.val_per_dataset;
  top["datasets"] = json::array();
  for (const auto& d : spec.datasets) top["datasets"].push_back(d.taxonomy.dataset_id);
  {
    std::ofstream out(fs::path(root) / "corpus.json");
    if (!out) throw std::runtime_error("corpus: cannot write " + root + "/corpus.json");
    out << top.dump(1) << "\n";
  }

  const std::pair<std::string, int> splits[] = {
      {"train", spec.train_per_dataset},
      {"val", spec.val_per_dataset},
  };
  for (const auto& [split, count] : splits) {
    for (const auto& recipe : spec.datasets) {
      uint64_t stream =
          mix64(spec.seed, fnv1a64(recipe.taxonomy.dataset_id + "/" + split));
      std::vector<DatasetSample> samples;
      samples.reserve(static_cast<size_t>(count));
      for (int i = 0; i < count; ++i) {
        BaseScene scene =
            generate_scene(mix64(stream, static_cast<uint64_t>(i)), spec.generator);
        DatasetSample s;
        s.gt = project_labels(scene, recipe.projection, recipe.taxonomy);
        s.image = std::move(scene.image);
        samples.push_back(std::move(s));
      }
      write_dataset((fs::path(root) / split / recipe.taxonomy.dataset_id).string(),
                    recipe.taxonomy, samples);
    }
  }
}

std::vector<LoadedDataset> load_corpus(const std::string& root, const std::string& split) {
  std::ifstream in(fs::path(root) / "corpus.json");
  if (!in) throw std::runtime_error("corpus: missing " + root + "/corpus.json");
  json top;
  try {
    in >> top;
  } catch (const json::exception& e) {
    throw std::runtime_error("corpus: bad corpus.json: " + std::string(e.what()));
  }
  if (!top.contains("datasets")) throw std::runtime_error("corpus: corpus.json lacks datasets");
  std::vector<LoadedDataset> out;
  for (const auto& id : top["datasets"])
    out.push_back(load_dataset((fs::path(root) / split / id.get<std::string>()).string()));
  return out;
}

}  // namespace mdseg
