#pragma once

#include <string>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/rng.hpp"

namespace mdseg {

// One shape kind the generator can draw, with its colour family.
struct ShapeSpec {
  std::string name;
  uint8_t base_r = 0, base_g = 0, base_b = 0;
};

struct GeneratorConfig {
  int canvas_h = 64, canvas_w = 64;
  int min_objects = 2, max_objects = 4;
  int size_min = 5, size_max = 12;  // circle radius / square half-extent / triangle half-base
  int color_jitter = 40;            // per-channel shift around the family colour
  std::vector<ShapeSpec> shapes = {
      {"circle", 200, 64, 64},
      {"square", 64, 180, 72},
      {"triangle", 72, 92, 200},
  };

  void validate() const;
};

struct SceneInstance {
  std::string base_class;
  ArrayU8 mask;  // (H, W), values 0/1
};

struct BaseScene {
  uint64_t seed = 0;
  ArrayU8 image;  // (3, H, W)
  std::vector<SceneInstance> instances;
};

// Reproducible textured canvas with disjoint colored shapes.
BaseScene generate_scene(uint64_t seed, const GeneratorConfig& config);

}  // namespace mdseg
