#include "mdseg/projection.hpp"

#include <stdexcept>

namespace mdseg {

GroundTruthSet project_labels(const BaseScene& scene, const TaxonomyProjection& projection,
                              const DatasetTaxonomy& taxonomy) {
  GroundTruthSet gt;
  gt.height = scene.image.dim(1);
  gt.width = scene.image.dim(2);
  for (const auto& inst : scene.instances) {
    auto it = projection.rules.find(inst.base_class);
    if (it == projection.rules.end())
      throw std::invalid_argument("projection '" + projection.dataset_id +
                                  "' does not cover base class '" + inst.base_class + "'");
    const ProjectionRule& rule = it->second;
    std::string name;
    switch (rule.mode) {
      case ProjectionRule::Mode::Drop:
        continue;
      case ProjectionRule::Mode::Keep:
        name = rule.target;
        break;
      case ProjectionRule::Mode::SplitByArea: {
        int area = 0;
        for (uint8_t v : inst.mask.data) area += v != 0;
        name = area >= rule.area_threshold ? rule.at_least : rule.below;
        break;
      }
    }
    auto index = taxonomy.index_of(name);
    if (!index)
      throw std::invalid_argument("projection '" + projection.dataset_id + "' maps '" +
                                  inst.base_class + "' to '" + name +
                                  "', which is not in taxonomy '" + taxonomy.dataset_id + "'");
    GtInstance out;
    out.class_index = *index;
    out.mask = inst.mask;
    gt.instances.push_back(std::move(out));
  }
  gt.validate(taxonomy.num_classes());
  return gt;
}

}  // namespace mdseg
