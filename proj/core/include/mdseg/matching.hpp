#pragma once

#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/ground_truth.hpp"
#include "mdseg/losses.hpp"

namespace mdseg {

struct MatchResult {
  std::vector<int> pred_to_gt;  // one entry per query; -1 = unassigned
  double total_cost = 0;

  int matched() const {
    int m = 0;
    for (int g : pred_to_gt) m += g >= 0;
    return m;
  }
};

// Cost of pairing one query with one annotated segment:
// -p(class) + lambda_focal * focal + lambda_dice * dice.
// class_probs is a softmax row over K+1 classes, mask_probs a flat mask in
// [0,1] with the same element count as the segment mask.
template <typename T>
double match_cost(const Array<T>& class_probs, const Array<T>& mask_probs,
                  const GtInstance& segment, const LossConfig& cfg) {
  if (segment.class_index < 0 ||
      segment.class_index >= static_cast<int>(class_probs.numel()))
    throw std::invalid_argument("match cost: class index out of range");
  Array<T> target = segment.mask.template cast<T>();
  target.shape = {static_cast<int>(target.numel())};
  return -static_cast<double>(class_probs[static_cast<size_t>(segment.class_index)]) +
         cfg.lambda_focal *
             focal_loss_value(mask_probs, target, cfg.focal_gamma, cfg.focal_alpha) +
         cfg.lambda_dice * dice_loss_value(mask_probs, target, cfg.dice_smooth);
}

// Full pairwise cost matrix, queries x segments.  logits (N, K+1) are
// temperature-scaled alignment scores (softmaxed internally), mask_probs
// (N, H*W) sigmoid outputs.
template <typename T>
ArrayD build_match_cost(const Array<T>& logits, const Array<T>& mask_probs,
                        const GroundTruthSet& gt, const LossConfig& cfg) {
  if (logits.ndim() != 2 || mask_probs.ndim() != 2 || logits.rows() != mask_probs.rows())
    throw std::invalid_argument("match cost: query count mismatch");
  int n = logits.rows(), k = logits.cols(), m = gt.count();
  ArrayD cost({n, m});
  Array<T> prow({k}), mrow({mask_probs.cols()});
  for (int i = 0; i < n; ++i) {
    const T* z = &logits.at(i, 0);
    double mx = z[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double sum = 0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
    for (int j = 0; j < k; ++j)
      prow[static_cast<size_t>(j)] =
          static_cast<T>(std::exp(static_cast<double>(z[j]) - mx) / sum);
    for (int j = 0; j < mask_probs.cols(); ++j) mrow[static_cast<size_t>(j)] = mask_probs.at(i, j);
    for (int j = 0; j < m; ++j)
      cost.at(i, j) = match_cost(prow, mrow, gt.instances[static_cast<size_t>(j)], cfg);
  }
  return cost;
}

// Minimum-cost assignment of every segment (column) to a distinct query
// (row); rows may outnumber columns, never the reverse.
MatchResult hungarian_match(const ArrayD& cost);

// Exhaustive reference matcher; refuses more than 7 columns.
MatchResult brute_force_match(const ArrayD& cost);

}  // namespace mdseg
