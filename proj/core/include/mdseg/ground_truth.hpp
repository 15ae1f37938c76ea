#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mdseg/array.hpp"

namespace mdseg {

// One annotated segment: a dataset-taxonomy class index and a binary mask.
struct GtInstance {
  int class_index = -1;
  ArrayU8 mask;  // (H, W), values 0/1

  int area() const {
    int a = 0;
    for (uint8_t v : mask.data) a += v != 0;
    return a;
  }
};

struct GroundTruthSet {
  int height = 0, width = 0;
  std::vector<GtInstance> instances;

  int count() const { return static_cast<int>(instances.size()); }

  // num_classes = K of the owning dataset; background_index = K is not a
  // valid instance class
  void validate(int num_classes) const {
    for (const auto& inst : instances) {
      if (inst.class_index < 0 || inst.class_index >= num_classes)
        throw std::invalid_argument("ground truth: class index " +
                                    std::to_string(inst.class_index) + " out of range");
      if (inst.mask.ndim() != 2 || inst.mask.dim(0) != height || inst.mask.dim(1) != width)
        throw std::invalid_argument("ground truth: mask shape mismatch");
      if (inst.area() == 0) throw std::invalid_argument("ground truth: empty mask");
    }
  }
};

}  // namespace mdseg
