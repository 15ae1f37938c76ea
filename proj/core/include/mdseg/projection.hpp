#pragma once

#include <map>
#include <string>

#include "mdseg/ground_truth.hpp"
#include "mdseg/scene_gen.hpp"
#include "mdseg/taxonomy.hpp"

namespace mdseg {

// How one base class appears in a dataset: kept under some name (several base
// classes may share one, merging them), split into subclasses by mask area,
// or left unannotated.
struct ProjectionRule {
  enum class Mode { Keep, Drop, SplitByArea };
  Mode mode = Mode::Keep;
  std::string target;                // Keep
  std::string below, at_least;       // SplitByArea subclass names
  int area_threshold = 0;            // pixels; at_least wins at the threshold

  static ProjectionRule keep(std::string name) {
    ProjectionRule r;
    r.mode = Mode::Keep;
    r.target = std::move(name);
    return r;
  }
  static ProjectionRule drop() {
    ProjectionRule r;
    r.mode = Mode::Drop;
    return r;
  }
  static ProjectionRule split(int threshold, std::string below, std::string at_least) {
    ProjectionRule r;
    r.mode = Mode::SplitByArea;
    r.area_threshold = threshold;
    r.below = std::move(below);
    r.at_least = std::move(at_least);
    return r;
  }
};

struct TaxonomyProjection {
  std::string dataset_id;
  std::map<std::string, ProjectionRule> rules;  // keyed by base class name
};

// Applies a dataset's view of the base annotations.  Instances survive as
// instances (merged classes share a label, they are not fused); dropped
// classes leave their pixels unannotated.
GroundTruthSet project_labels(const BaseScene& scene, const TaxonomyProjection& projection,
                              const DatasetTaxonomy& taxonomy);

}  // namespace mdseg
