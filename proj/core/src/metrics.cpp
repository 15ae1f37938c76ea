#include "mdseg/metrics.hpp"

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace mdseg {
namespace {

void check_same_shape(const ArrayI& a, const ArrayI& b, const char* what) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
    throw std::invalid_argument(std::string(what) + ": prediction/ground-truth shape mismatch");
}

// Pixel counts per segment id (index 0 = void); throws on out-of-range ids.
std::vector<long long> segment_areas(const PanopticMap& map, const char* what) {
  std::vector<long long> areas(map.segments.size() + 1, 0);
  for (int v : map.segment_ids.data) {
    if (v < 0 || v >= static_cast<int>(areas.size()))
      throw std::invalid_argument(std::string(what) + ": pixel references unknown segment id");
    ++areas[v];
  }
  return areas;
}

void check_classes(const PanopticMap& map, int num_classes, const char* what) {
  for (const auto& s : map.segments)
    if (s.class_index < 0 || s.class_index >= num_classes)
      throw std::invalid_argument(std::string(what) + ": segment class out of range");
}

}  // namespace

SemanticConfusion::SemanticConfusion(int num_classes)
    : num_classes(num_classes), tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("confusion: need at least one class");
}

void SemanticConfusion::add(const ArrayI& pred, const ArrayI& gt) {
  check_same_shape(pred, gt, "miou");
  for (size_t p = 0; p < pred.data.size(); ++p) {
    int g = gt.data[p];
    if (g == kIgnoreLabel) continue;
    int pr = pred.data[p];
    if (pr < 0 || pr > num_classes || g > num_classes)
      throw std::invalid_argument("miou: label out of range");
    if (pr == g) {
      if (pr < num_classes) ++tp[pr];
      continue;
    }
    if (pr < num_classes) ++fp[pr];
    if (g < num_classes) ++fn[g];
  }
  ++images;
}

void SemanticConfusion::merge(const SemanticConfusion& other) {
  if (other.num_classes != num_classes)
    throw std::invalid_argument("confusion merge: class count mismatch");
  images += other.images;
  for (int c = 0; c < num_classes; ++c) {
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
  }
}

SemanticMetrics miou(const SemanticConfusion& confusion) {
  if (confusion.images == 0) throw std::invalid_argument("miou: empty evaluation split");
  SemanticMetrics out;
  out.iou.assign(confusion.num_classes, 0.0);
  out.present.assign(confusion.num_classes, 0);
  double sum = 0.0;
  int n_present = 0;
  for (int c = 0; c < confusion.num_classes; ++c) {
    long long denom = confusion.tp[c] + confusion.fp[c] + confusion.fn[c];
    if (denom > 0) out.iou[c] = static_cast<double>(confusion.tp[c]) / static_cast<double>(denom);
    if (confusion.tp[c] + confusion.fn[c] > 0) {
      out.present[c] = 1;
      sum += out.iou[c];
      ++n_present;
    }
  }
  if (n_present == 0) throw std::invalid_argument("miou: ground truth contains no class");
  out.mean_iou = sum / n_present;
  return out;
}

SemanticMetrics miou(const std::vector<SemanticMap>& preds, const std::vector<ArrayI>& gts,
                     int num_classes) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("miou: prediction/ground-truth count mismatch");
  SemanticConfusion acc(num_classes);
  for (size_t i = 0; i < preds.size(); ++i) acc.add(preds[i].labels, gts[i]);
  return miou(acc);
}

PanopticCounts::PanopticCounts(int num_classes)
    : num_classes(num_classes),
      iou_sum(num_classes, 0.0),
      tp(num_classes, 0),
      fp(num_classes, 0),
      fn(num_classes, 0) {
  if (num_classes < 1) throw std::invalid_argument("panoptic counts: need at least one class");
}

void PanopticCounts::add(const PanopticMap& pred, const PanopticMap& gt) {
  check_same_shape(pred.segment_ids, gt.segment_ids, "panoptic");
  check_classes(pred, num_classes, "panoptic prediction");
  check_classes(gt, num_classes, "panoptic ground truth");
  std::vector<long long> pred_area = segment_areas(pred, "panoptic prediction");
  std::vector<long long> gt_area = segment_areas(gt, "panoptic ground truth");

  int n_pred = static_cast<int>(pred.segments.size());
  std::unordered_map<long long, long long> inter;  // key: gt_id * (n_pred+1) + pred_id
  for (size_t p = 0; p < pred.segment_ids.data.size(); ++p)
    ++inter[static_cast<long long>(gt.segment_ids.data[p]) * (n_pred + 1) +
            pred.segment_ids.data[p]];

  auto inter_of = [&](int g, int pr) {
    auto it = inter.find(static_cast<long long>(g) * (n_pred + 1) + pr);
    return it == inter.end() ? 0LL : it->second;
  };

  std::unordered_set<int> matched_gt, matched_pred;
  for (const auto& [key, count] : inter) {
    int g = static_cast<int>(key / (n_pred + 1));
    int pr = static_cast<int>(key % (n_pred + 1));
    if (g == 0 || pr == 0) continue;
    int cls = gt.segments[g - 1].class_index;
    if (pred.segments[pr - 1].class_index != cls) continue;
    // The slice of the prediction lying on ground-truth void does not count
    // against the union.
    long long uni = gt_area[g] + pred_area[pr] - count - inter_of(0, pr);
    double iou = uni > 0 ? static_cast<double>(count) / static_cast<double>(uni) : 0.0;
    if (iou <= 0.5) continue;
    if (!matched_gt.insert(g).second || !matched_pred.insert(pr).second)
      throw std::logic_error("panoptic: matching above IoU 0.5 is not one-to-one");
    ++tp[cls];
    iou_sum[cls] += iou;
  }
  for (int g = 1; g <= static_cast<int>(gt.segments.size()); ++g)
    if (!matched_gt.count(g)) ++fn[gt.segments[g - 1].class_index];
  for (int pr = 1; pr <= n_pred; ++pr) {
    if (matched_pred.count(pr)) continue;
    // Unmatched predictions sitting mostly on void are not penalized.
    if (2 * inter_of(0, pr) > pred_area[pr]) continue;
    ++fp[pred.segments[pr - 1].class_index];
  }
  ++images;
}

void PanopticCounts::merge(const PanopticCounts& other) {
  if (other.num_classes != num_classes)
    throw std::invalid_argument("panoptic merge: class count mismatch");
  images += other.images;
  for (int c = 0; c < num_classes; ++c) {
    iou_sum[c] += other.iou_sum[c];
    tp[c] += other.tp[c];
    fp[c] += other.fp[c];
    fn[c] += other.fn[c];
  }
}

PanopticMetrics panoptic_quality(const PanopticCounts& counts) {
  PanopticMetrics out;
  out.pq.assign(counts.num_classes, 0.0);
  out.sq.assign(counts.num_classes, 0.0);
  out.rq.assign(counts.num_classes, 0.0);
  out.present.assign(counts.num_classes, 0);
  double pq_sum = 0, sq_sum = 0, rq_sum = 0;
  int n_present = 0;
  for (int c = 0; c < counts.num_classes; ++c) {
    if (counts.tp[c] + counts.fp[c] + counts.fn[c] == 0) continue;
    out.present[c] = 1;
    ++n_present;
    double denom = counts.tp[c] + 0.5 * (counts.fp[c] + counts.fn[c]);
    out.pq[c] = counts.iou_sum[c] / denom;
    out.rq[c] = counts.tp[c] / denom;
    if (counts.tp[c] > 0) out.sq[c] = counts.iou_sum[c] / counts.tp[c];
    pq_sum += out.pq[c];
    sq_sum += out.sq[c];
    rq_sum += out.rq[c];
  }
  if (n_present > 0) {
    out.pq_mean = pq_sum / n_present;
    out.sq_mean = sq_sum / n_present;
    out.rq_mean = rq_sum / n_present;
  }
  return out;
}

PanopticMetrics panoptic_quality(const std::vector<PanopticMap>& preds,
                                 const std::vector<PanopticMap>& gts, int num_classes) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("panoptic: prediction/ground-truth count mismatch");
  PanopticCounts acc(num_classes);
  for (size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], gts[i]);
  return panoptic_quality(acc);
}

}  // namespace mdseg
