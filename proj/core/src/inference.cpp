#include "mdseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mdseg {
namespace {

void check_inputs(const ArrayF& logits, const ArrayF& mask_probs, int num_classes) {
  if (logits.ndim() != 2)
    throw std::invalid_argument("inference: logits must be (N, K+1)");
  if (logits.cols() != num_classes + 1)
    throw std::invalid_argument("inference: logits have " + std::to_string(logits.cols()) +
                                " columns but the taxonomy needs " +
                                std::to_string(num_classes + 1));
  if (mask_probs.ndim() != 3)
    throw std::invalid_argument("inference: mask probabilities must be (N, H, W)");
  if (mask_probs.dim(0) != logits.rows())
    throw std::invalid_argument("inference: query count mismatch between logits and masks");
}

// Row-wise softmax of (N, K+1) logits, computed in double.
std::vector<double> softmax_rows(const ArrayF& logits) {
  int n = logits.rows(), cols = logits.cols();
  std::vector<double> probs(static_cast<size_t>(n) * cols);
  for (int i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cols; ++c) mx = std::max(mx, static_cast<double>(logits.at(i, c)));
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      double e = std::exp(static_cast<double>(logits.at(i, c)) - mx);
      probs[static_cast<size_t>(i) * cols + c] = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) probs[static_cast<size_t>(i) * cols + c] /= sum;
  }
  return probs;
}

}  // namespace

void SemanticMap::validate(int num_classes) const {
  if (labels.ndim() != 2) throw std::logic_error("semantic map: labels must be 2-D");
  for (int v : labels.data)
    if (v < 0 || v > num_classes)
      throw std::logic_error("semantic map: label " + std::to_string(v) + " out of range");
}

void PanopticMap::validate(int num_classes) const {
  if (segment_ids.ndim() != 2) throw std::logic_error("panoptic map: ids must be 2-D");
  int n = static_cast<int>(segments.size());
  for (int i = 0; i < n; ++i) {
    if (segments[i].id != i + 1) throw std::logic_error("panoptic map: ids not contiguous");
    if (segments[i].class_index < 0 || segments[i].class_index >= num_classes)
      throw std::logic_error("panoptic map: segment class out of range");
  }
  for (int v : segment_ids.data)
    if (v < 0 || v > n)
      throw std::logic_error("panoptic map: pixel id " + std::to_string(v) + " out of range");
}

void InferenceConfig::validate() const {
  if (background_epsilon < 0) throw std::invalid_argument("background_epsilon must be >= 0");
  if (score_min < 0 || score_min > 1) throw std::invalid_argument("score_min must be in [0, 1]");
  if (overlap_min < 0 || overlap_min > 1)
    throw std::invalid_argument("overlap_min must be in [0, 1]");
}

SemanticMap semantic_inference(const ArrayF& logits, const ArrayF& mask_probs,
                               const DatasetTaxonomy& taxonomy, const InferenceConfig& config) {
  config.validate();
  int k = taxonomy.num_classes();
  check_inputs(logits, mask_probs, k);
  int n = logits.rows();
  int h = mask_probs.dim(1), w = mask_probs.dim(2);
  size_t pixels = static_cast<size_t>(h) * w;

  std::vector<double> probs = softmax_rows(logits);
  // scores[c * pixels + p] = sum_i probs[i][c] * mask_i[p]
  std::vector<double> scores(static_cast<size_t>(k) * pixels, 0.0);
  for (int i = 0; i < n; ++i) {
    const float* mask = mask_probs.data.data() + static_cast<size_t>(i) * pixels;
    for (int c = 0; c < k; ++c) {
      double coef = probs[static_cast<size_t>(i) * (k + 1) + c];
      double* row = scores.data() + static_cast<size_t>(c) * pixels;
      for (size_t p = 0; p < pixels; ++p) row[p] += coef * mask[p];
    }
  }

  SemanticMap out;
  out.labels = ArrayI({h, w}, taxonomy.background_index());
  for (size_t p = 0; p < pixels; ++p) {
    int best = 0;
    double best_score = scores[p];
    for (int c = 1; c < k; ++c) {
      double s = scores[static_cast<size_t>(c) * pixels + p];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    out.labels.data[p] = best_score < config.background_epsilon ? taxonomy.background_index() : best;
  }
  return out;
}

PanopticMap panoptic_inference(const ArrayF& logits, const ArrayF& mask_probs,
                               const DatasetTaxonomy& taxonomy, const InferenceConfig& config,
                               const std::vector<std::uint8_t>& is_thing) {
  config.validate();
  int k = taxonomy.num_classes();
  check_inputs(logits, mask_probs, k);
  if (!is_thing.empty() && static_cast<int>(is_thing.size()) != k)
    throw std::invalid_argument("panoptic: is_thing needs one flag per class");
  auto thing = [&](int c) { return is_thing.empty() || is_thing[c] != 0; };

  int n = logits.rows();
  int h = mask_probs.dim(1), w = mask_probs.dim(2);
  size_t pixels = static_cast<size_t>(h) * w;
  std::vector<double> probs = softmax_rows(logits);

  struct Candidate {
    int query;
    int cls;
    double score;
  };
  std::vector<Candidate> live;
  for (int i = 0; i < n; ++i) {
    const double* row = probs.data() + static_cast<size_t>(i) * (k + 1);
    int best = 0;
    for (int c = 1; c < k + 1; ++c)
      if (row[c] > row[best]) best = c;
    if (best == k || row[best] < config.score_min) continue;
    live.push_back({i, best, row[best]});
  }

  PanopticMap out;
  out.segment_ids = ArrayI({h, w}, 0);
  if (live.empty()) return out;

  // owner[p] = index into live, or -1 for void. A pixel belongs to the
  // candidate maximizing score * mask, and only where that candidate's own
  // mask probability reaches 0.5.
  std::vector<int> owner(pixels, -1);
  for (size_t p = 0; p < pixels; ++p) {
    int best = -1;
    double best_val = 0.0;
    for (size_t j = 0; j < live.size(); ++j) {
      double v = live[j].score *
                 mask_probs.data[static_cast<size_t>(live[j].query) * pixels + p];
      if (best < 0 || v > best_val) {
        best = static_cast<int>(j);
        best_val = v;
      }
    }
    if (mask_probs.data[static_cast<size_t>(live[best].query) * pixels + p] >= 0.5f)
      owner[p] = best;
  }

  std::vector<int> segment_of(live.size(), 0);  // 0 = dropped
  std::vector<int> merged_stuff(k, 0);          // class -> segment id
  int next_id = 0;
  for (size_t j = 0; j < live.size(); ++j) {
    long long nominal = 0, retained = 0;
    const float* mask = mask_probs.data.data() + static_cast<size_t>(live[j].query) * pixels;
    for (size_t p = 0; p < pixels; ++p) {
      if (mask[p] >= 0.5f) ++nominal;
      if (owner[p] == static_cast<int>(j)) ++retained;
    }
    if (retained == 0 ||
        static_cast<double>(retained) < config.overlap_min * static_cast<double>(nominal))
      continue;
    int cls = live[j].cls;
    if (!thing(cls) && merged_stuff[cls] != 0) {
      segment_of[j] = merged_stuff[cls];
      continue;
    }
    segment_of[j] = ++next_id;
    if (!thing(cls)) merged_stuff[cls] = next_id;
    out.segments.push_back({next_id, cls, thing(cls)});
  }

  for (size_t p = 0; p < pixels; ++p)
    if (owner[p] >= 0) out.segment_ids.data[p] = segment_of[owner[p]];
  return out;
}

ArrayI semantic_map_from_gt(const GroundTruthSet& gt, int background_index,
                            const ArrayU8* ignore) {
  ArrayI labels({gt.height, gt.width}, background_index);
  for (const auto& inst : gt.instances) {
    if (inst.mask.dim(0) != gt.height || inst.mask.dim(1) != gt.width)
      throw std::invalid_argument("semantic map: instance mask shape mismatch");
    for (size_t p = 0; p < labels.data.size(); ++p)
      if (inst.mask.data[p]) labels.data[p] = inst.class_index;
  }
  if (ignore) {
    if (ignore->dim(0) != gt.height || ignore->dim(1) != gt.width)
      throw std::invalid_argument("semantic map: ignore mask shape mismatch");
    for (size_t p = 0; p < labels.data.size(); ++p)
      if (ignore->data[p]) labels.data[p] = kIgnoreLabel;
  }
  return labels;
}

PanopticMap panoptic_map_from_gt(const GroundTruthSet& gt,
                                 const std::vector<std::uint8_t>& is_thing) {
  auto thing = [&](int c) {
    if (is_thing.empty()) return true;
    if (c < 0 || c >= static_cast<int>(is_thing.size()))
      throw std::invalid_argument("panoptic gt map: class outside is_thing");
    return is_thing[c] != 0;
  };
  PanopticMap out;
  out.segment_ids = ArrayI({gt.height, gt.width}, 0);
  for (const auto& inst : gt.instances) {
    if (inst.mask.dim(0) != gt.height || inst.mask.dim(1) != gt.width)
      throw std::invalid_argument("panoptic gt map: instance mask shape mismatch");
    int id = static_cast<int>(out.segments.size()) + 1;
    out.segments.push_back({id, inst.class_index, thing(inst.class_index)});
    for (size_t p = 0; p < out.segment_ids.data.size(); ++p)
      if (inst.mask.data[p]) out.segment_ids.data[p] = id;
  }
  return out;
}

}  // namespace mdseg
