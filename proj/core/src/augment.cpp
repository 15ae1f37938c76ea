#include "mdseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdseg {

void AugmentationPolicy::validate() const {
  if (dataset_id.empty()) throw std::invalid_argument("augment: policy without dataset id");
  if (crop_h < 1 || crop_w < 1) throw std::invalid_argument("augment: bad crop size");
  if (!(scale_min > 0) || scale_max < scale_min)
    throw std::invalid_argument("augment: bad scale range");
  if (hflip_prob < 0 || hflip_prob > 1)
    throw std::invalid_argument("augment: bad flip probability");
  if (color_jitter < 0 || color_jitter >= 1)
    throw std::invalid_argument("augment: bad color jitter");
}

void PolicySet::add(AugmentationPolicy policy) {
  policy.validate();
  std::string id = policy.dataset_id;
  if (!policies_.emplace(std::move(id), std::move(policy)).second)
    throw std::invalid_argument("augment: duplicate policy for dataset");
}

bool PolicySet::has(const std::string& dataset_id) const {
  return policies_.count(dataset_id) > 0;
}

const AugmentationPolicy& PolicySet::get(const std::string& dataset_id) const {
  auto it = policies_.find(dataset_id);
  if (it == policies_.end())
    throw std::invalid_argument("augment: no policy registered for dataset '" + dataset_id +
                                "'");
  return it->second;
}

namespace {

void check_spatial(const ArrayU8& img) {
  if (img.ndim() != 2 && !(img.ndim() == 3 && img.dim(0) == 3))
    throw std::invalid_argument("augment: want (H, W) or (3, H, W)");
}

int height_of(const ArrayU8& img) { return img.dim(img.ndim() - 2); }
int width_of(const ArrayU8& img) { return img.dim(img.ndim() - 1); }

}  // namespace

ArrayU8 resize_nearest(const ArrayU8& img, int out_h, int out_w) {
  check_spatial(img);
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("augment: bad resize target");
  int ch = img.ndim() == 3 ? 3 : 1;
  int h = height_of(img), w = width_of(img);
  ArrayU8 out(img.ndim() == 3 ? std::vector<int>{3, out_h, out_w}
                              : std::vector<int>{out_h, out_w});
  for (int y = 0; y < out_h; ++y) {
    int sy = std::min(h - 1, static_cast<int>((static_cast<int64_t>(y) * h) / out_h));
    for (int x = 0; x < out_w; ++x) {
      int sx = std::min(w - 1, static_cast<int>((static_cast<int64_t>(x) * w) / out_w));
      for (int c = 0; c < ch; ++c) {
        uint8_t v = ch == 3 ? img.at(c, sy, sx) : img.at(sy, sx);
        if (ch == 3)
          out.at(c, y, x) = v;
        else
          out.at(y, x) = v;
      }
    }
  }
  return out;
}

ArrayU8 crop_region(const ArrayU8& img, int top, int left, int h, int w) {
  check_spatial(img);
  if (top < 0 || left < 0 || h < 1 || w < 1 || top + h > height_of(img) ||
      left + w > width_of(img))
    throw std::invalid_argument("augment: crop outside image");
  int ch = img.ndim() == 3 ? 3 : 1;
  ArrayU8 out(img.ndim() == 3 ? std::vector<int>{3, h, w} : std::vector<int>{h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        if (ch == 3)
          out.at(c, y, x) = img.at(c, top + y, left + x);
        else
          out.at(y, x) = img.at(top + y, left + x);
      }
  return out;
}

ArrayU8 hflip(const ArrayU8& img) {
  check_spatial(img);
  int ch = img.ndim() == 3 ? 3 : 1;
  int h = height_of(img), w = width_of(img);
  ArrayU8 out(img.shape);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        if (ch == 3)
          out.at(c, y, x) = img.at(c, y, w - 1 - x);
        else
          out.at(y, x) = img.at(y, w - 1 - x);
      }
  return out;
}

AugmentedSample augment_sample(const ArrayU8& image, const GroundTruthSet& gt,
                               const AugmentationPolicy& policy, Rng& rng) {
  policy.validate();
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw std::invalid_argument("augment: want a (3, H, W) image");
  if (gt.height != image.dim(1) || gt.width != image.dim(2))
    throw std::invalid_argument("augment: annotation size mismatch");

  // the random stream has a fixed draw order regardless of parameter values
  double s = rng.uniform(policy.scale_min, policy.scale_max);
  int sh = static_cast<int>(std::floor(image.dim(1) * s));
  int sw = static_cast<int>(std::floor(image.dim(2) * s));
  if (sh < policy.crop_h || sw < policy.crop_w)
    throw std::invalid_argument("augment: crop larger than the scaled image");
  int top = rng.uniform_int(0, sh - policy.crop_h);
  int left = rng.uniform_int(0, sw - policy.crop_w);
  bool flip = rng.bernoulli(policy.hflip_prob);
  double brightness = rng.uniform(1.0 - policy.color_jitter, 1.0 + policy.color_jitter);
  double contrast = rng.uniform(1.0 - policy.color_jitter, 1.0 + policy.color_jitter);

  auto geometry = [&](const ArrayU8& src) {
    ArrayU8 out = crop_region(resize_nearest(src, sh, sw), top, left, policy.crop_h,
                              policy.crop_w);
    return flip ? hflip(out) : out;
  };

  AugmentedSample out;
  out.image = geometry(image);
  for (auto& v : out.image.data) {
    double adj = (static_cast<double>(v) * brightness - 128.0) * contrast + 128.0;
    v = static_cast<uint8_t>(std::clamp(static_cast<int>(std::lround(adj)), 0, 255));
  }
  out.gt.height = policy.crop_h;
  out.gt.width = policy.crop_w;
  for (const auto& inst : gt.instances) {
    GtInstance moved;
    moved.class_index = inst.class_index;
    moved.mask = geometry(inst.mask);
    if (moved.area() > 0) out.gt.instances.push_back(std::move(moved));
  }
  return out;
}

AugmentedSample augment_for_dataset(const ArrayU8& image, const GroundTruthSet& gt,
                                    const std::string& dataset_id, const PolicySet& policies,
                                    Rng& rng) {
  return augment_sample(image, gt, policies.get(dataset_id), rng);
}

}  // namespace mdseg
