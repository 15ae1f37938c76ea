#include "mdseg/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdseg {

namespace {

struct Box {
  int y0, x0, y1, x1;  // inclusive
};

bool boxes_overlap(const Box& a, const Box& b) {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

uint8_t clamp_u8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

ArrayU8 rasterize(const std::string& kind, int cy, int cx, int size, int h, int w) {
  ArrayU8 mask({h, w}, uint8_t{0});
  for (int dy = -size; dy <= size; ++dy)
    for (int dx = -size; dx <= size; ++dx) {
      bool inside = false;
      if (kind == "circle") {
        inside = dx * dx + dy * dy <= size * size;
      } else if (kind == "square") {
        inside = true;
      } else {  // upward isoceles triangle: apex on top, base at the bottom
        int halfwidth = (dy + size) / 2;
        inside = std::abs(dx) <= halfwidth;
      }
      if (inside) mask.at(cy + dy, cx + dx) = 1;
    }
  return mask;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (shapes.empty()) throw std::invalid_argument("generator: no shape classes configured");
  for (const auto& s : shapes)
    if (s.name.empty()) throw std::invalid_argument("generator: empty shape name");
  if (canvas_h < 8 || canvas_w < 8) throw std::invalid_argument("generator: canvas too small");
  if (min_objects < 1 || max_objects < min_objects)
    throw std::invalid_argument("generator: bad object count range");
  if (size_min < 2 || size_max < size_min)
    throw std::invalid_argument("generator: bad size range");
  if (2 * size_max + 4 > std::min(canvas_h, canvas_w))
    throw std::invalid_argument("generator: shapes cannot fit the canvas");
}

BaseScene generate_scene(uint64_t seed, const GeneratorConfig& config) {
  config.validate();
  const int h = config.canvas_h, w = config.canvas_w;
  BaseScene scene;
  scene.seed = seed;
  scene.image = ArrayU8({3, h, w});

  Rng rng(seed);
  // textured background: low-frequency wave plus per-pixel noise
  double fx = rng.uniform(0.02, 0.08), fy = rng.uniform(0.02, 0.08);
  double phase = rng.uniform(0.0, 6.283185307179586);
  const int ch_off[3] = {4, 0, -4};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double wave = 16.0 * std::sin(6.283185307179586 * (fx * x + fy * y) + phase);
      int noise = rng.uniform_int(-12, 12);
      int base = 118 + static_cast<int>(std::lround(wave)) + noise;
      for (int c = 0; c < 3; ++c) scene.image.at(c, y, x) = clamp_u8(base + ch_off[c]);
    }

  int target = rng.uniform_int(config.min_objects, config.max_objects);
  std::vector<Box> placed;
  for (int obj = 0; obj < target; ++obj) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      int kind = rng.uniform_int(0, static_cast<int>(config.shapes.size()) - 1);
      int size = rng.uniform_int(config.size_min, config.size_max);
      int cy = rng.uniform_int(size + 1, h - 2 - size);
      int cx = rng.uniform_int(size + 1, w - 2 - size);
      Box box{cy - size - 1, cx - size - 1, cy + size + 1, cx + size + 1};
      bool ok = true;
      for (const auto& other : placed)
        if (boxes_overlap(box, other)) {
          ok = false;
          break;
        }
      if (!ok) continue;

      const auto& spec = config.shapes[static_cast<size_t>(kind)];
      int jr = rng.uniform_int(-config.color_jitter, config.color_jitter);
      int jg = rng.uniform_int(-config.color_jitter, config.color_jitter);
      int jb = rng.uniform_int(-config.color_jitter, config.color_jitter);
      uint8_t col[3] = {clamp_u8(spec.base_r + jr), clamp_u8(spec.base_g + jg),
                        clamp_u8(spec.base_b + jb)};
      SceneInstance inst;
      inst.base_class = spec.name;
      inst.mask = rasterize(spec.name, cy, cx, size, h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (inst.mask.at(y, x))
            for (int c = 0; c < 3; ++c) scene.image.at(c, y, x) = col[c];
      scene.instances.push_back(std::move(inst));
      placed.push_back(box);
      break;
    }
  }
  return scene;
}

}  // namespace mdseg
