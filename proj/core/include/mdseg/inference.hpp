#pragma once

#include <cstdint>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/ground_truth.hpp"
#include "mdseg/taxonomy.hpp"

namespace mdseg {

// Label-map value for pixels excluded from evaluation (unannotated regions
// whose true class is outside the active class list).
inline constexpr int kIgnoreLabel = -1;

// Per-pixel class labels over one dataset's class list; values in [0, K] with
// K = background.
struct SemanticMap {
  ArrayI labels;  // (H, W)

  void validate(int num_classes) const;
};

struct PanopticSegment {
  int id = 0;  // 1-based; pixel value 0 is void
  int class_index = -1;
  bool is_thing = true;
};

// Segment-id map plus the segment table; ids are contiguous 1..segments.size()
// and segments[i].id == i + 1.
struct PanopticMap {
  ArrayI segment_ids;  // (H, W), 0 = void
  std::vector<PanopticSegment> segments;

  void validate(int num_classes) const;
};

struct InferenceConfig {
  // Semantic: a pixel whose winning aggregate score is below this maps to
  // background. 0 disables the threshold (scores are never negative).
  double background_epsilon = 0.0;
  // Panoptic: queries whose top class confidence is below this are discarded.
  double score_min = 0.5;
  // Panoptic: segments keeping less than this fraction of their nominal mask
  // area after pixel assignment are dropped.
  double overlap_min = 0.5;

  void validate() const;
};

// Aggregates query predictions into a label map:
//   label(y, x) = argmax_c  sum_i softmax(logits_i)[c] * mask_probs_i(y, x)
// over the K foreground classes (ties resolve to the lowest class index);
// pixels whose winning score falls below background_epsilon become background.
// logits: (N, K+1) raw class scores, last column = "no object".
// mask_probs: (N, H, W) per-query mask probabilities in [0, 1].
SemanticMap semantic_inference(const ArrayF& logits, const ArrayF& mask_probs,
                               const DatasetTaxonomy& taxonomy,
                               const InferenceConfig& config = {});

// Assembles instance-style segments: each query takes (class, score) from the
// argmax of its class softmax; queries predicting "no object" or scoring below
// score_min are discarded. Every pixel goes to the surviving query maximizing
// score * mask probability, but only where that query's own mask probability
// is >= 0.5 (elsewhere void). A query's nominal area is the count of pixels
// where its mask is >= 0.5; segments retaining < overlap_min of that area are
// dropped. Surviving segments of the same class are merged into one id when
// the class is not a "thing". is_thing holds one flag per foreground class;
// empty means every class is a thing.
PanopticMap panoptic_inference(const ArrayF& logits, const ArrayF& mask_probs,
                               const DatasetTaxonomy& taxonomy,
                               const InferenceConfig& config = {},
                               const std::vector<std::uint8_t>& is_thing = {});

// Rasterizes annotations into a label map; later instances overwrite earlier
// ones (instances from the shipped pipeline are disjoint), unannotated pixels
// get background_index. Pixels listed in ignore (same shape, nonzero = ignore)
// become kIgnoreLabel from metrics.hpp.
ArrayI semantic_map_from_gt(const GroundTruthSet& gt, int background_index,
                            const ArrayU8* ignore = nullptr);

// One segment per annotated instance, in annotation order; unannotated pixels
// are void. Later instances win overlapping pixels.
PanopticMap panoptic_map_from_gt(const GroundTruthSet& gt,
                                 const std::vector<std::uint8_t>& is_thing = {});

}  // namespace mdseg
