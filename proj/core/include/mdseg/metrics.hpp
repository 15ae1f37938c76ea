#pragma once

#include <cstdint>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/inference.hpp"

namespace mdseg {

// Pixel confusion counts over one class list; mergeable across workers/images.
// Ground-truth pixels equal to kIgnoreLabel never count; the background class
// never receives an IoU (it has no row) but background mispredictions do cost
// false negatives, and predictions onto annotated background cost false
// positives.
struct SemanticConfusion {
  int num_classes = 0;
  long long images = 0;
  std::vector<long long> tp, fp, fn;  // one slot per foreground class

  explicit SemanticConfusion(int num_classes);
  // pred: (H, W) labels in [0, K]; gt: (H, W) labels in [0, K] or kIgnoreLabel.
  void add(const ArrayI& pred, const ArrayI& gt);
  void merge(const SemanticConfusion& other);
};

struct SemanticMetrics {
  std::vector<double> iou;             // per class; 0 where class absent
  std::vector<std::uint8_t> present;   // class appears in ground truth
  double mean_iou = 0.0;               // mean over present classes
};

// Errors if the accumulator saw no images or ground truth contains no class.
SemanticMetrics miou(const SemanticConfusion& confusion);
SemanticMetrics miou(const std::vector<SemanticMap>& preds, const std::vector<ArrayI>& gts,
                     int num_classes);

// Segment-level counts for panoptic quality; mergeable.
struct PanopticCounts {
  int num_classes = 0;
  long long images = 0;
  std::vector<double> iou_sum;        // summed IoU of true positives, per class
  std::vector<long long> tp, fp, fn;  // per class

  explicit PanopticCounts(int num_classes);
  void add(const PanopticMap& pred, const PanopticMap& gt);
  void merge(const PanopticCounts& other);
};

struct PanopticMetrics {
  std::vector<double> pq, sq, rq;
  std::vector<std::uint8_t> present;  // tp + fp + fn > 0
  double pq_mean = 0.0, sq_mean = 0.0, rq_mean = 0.0;  // over present classes
};

// A prediction matches a ground-truth segment of the same class when
// IoU > 0.5, with the part of the prediction lying on ground-truth void
// excluded from the union; matching is provably one-to-one (asserted).
// Unmatched predictions with more than half their area on void are not
// penalized. PQ = sum IoU(TP) / (|TP| + |FP|/2 + |FN|/2) per class.
// Empty input yields all-zero metrics.
PanopticMetrics panoptic_quality(const PanopticCounts& counts);
PanopticMetrics panoptic_quality(const std::vector<PanopticMap>& preds,
                                 const std::vector<PanopticMap>& gts, int num_classes);

}  // namespace mdseg
