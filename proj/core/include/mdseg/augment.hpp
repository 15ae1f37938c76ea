#pragma once

#include <map>
#include <string>

#include "mdseg/array.hpp"
#include "mdseg/ground_truth.hpp"
#include "mdseg/rng.hpp"

namespace mdseg {

// One dataset's training-time transform: scale jitter, fixed-size crop,
// horizontal flip, photometric jitter.
struct AugmentationPolicy {
  std::string dataset_id;
  int crop_h = 0, crop_w = 0;
  double scale_min = 1.0, scale_max = 1.0;
  double hflip_prob = 0.0;
  double color_jitter = 0.0;  // brightness/contrast half-range

  void validate() const;
};

class PolicySet {
 public:
  void add(AugmentationPolicy policy);
  bool has(const std::string& dataset_id) const;
  const AugmentationPolicy& get(const std::string& dataset_id) const;  // missing -> error
  const std::map<std::string, AugmentationPolicy>& all() const { return policies_; }

 private:
  std::map<std::string, AugmentationPolicy> policies_;
};

// Geometric helpers; images are (3, H, W), masks (H, W).
ArrayU8 resize_nearest(const ArrayU8& img, int out_h, int out_w);
ArrayU8 crop_region(const ArrayU8& img, int top, int left, int h, int w);
ArrayU8 hflip(const ArrayU8& img);

struct AugmentedSample {
  ArrayU8 image;  // (3, crop_h, crop_w)
  GroundTruthSet gt;
};

// Applies one policy to an image/annotation pair.  Image and masks move
// through identical geometry; instances whose mask ends up empty after the
// crop are removed.
AugmentedSample augment_sample(const ArrayU8& image, const GroundTruthSet& gt,
                               const AugmentationPolicy& policy, Rng& rng);

// Policy lookup by the sample's source dataset, then augment_sample.
AugmentedSample augment_for_dataset(const ArrayU8& image, const GroundTruthSet& gt,
                                    const std::string& dataset_id, const PolicySet& policies,
                                    Rng& rng);

}  // namespace mdseg
