#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/ground_truth.hpp"

namespace mdseg {

struct LossConfig {
  double tau = 0.07;          // alignment temperature
  double lambda_focal = 20.0;
  double lambda_dice = 1.0;
  double w_noobj = 0.1;       // CE weight for queries labelled background
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_smooth = 1.0;

  void validate() const {
    if (!(tau > 0)) throw std::invalid_argument("loss config: tau must be positive");
    if (lambda_focal < 0 || lambda_dice < 0)
      throw std::invalid_argument("loss config: negative loss weight");
    if (!(w_noobj > 0) || w_noobj > 1)
      throw std::invalid_argument("loss config: w_noobj must be in (0, 1]");
    if (focal_gamma < 0) throw std::invalid_argument("loss config: negative focal gamma");
    if (focal_alpha < 0 || focal_alpha > 1)
      throw std::invalid_argument("loss config: focal alpha must be in [0, 1]");
    if (dice_smooth < 0) throw std::invalid_argument("loss config: negative dice smoothing");
  }
};

// Query/class alignment scores: (queries · text^T) / tau.
// queries (N, C), text (K+1, C) -> (N, K+1).
template <typename T>
Array<T> alignment_logits_value(const Array<T>& queries, const Array<T>& text, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("alignment: tau must be positive");
  if (queries.ndim() != 2 || text.ndim() != 2 || queries.cols() != text.cols())
    throw std::invalid_argument("alignment: embedding width mismatch");
  int n = queries.rows(), k = text.rows(), c = queries.cols();
  Array<T> out({n, k});
  double inv_tau = 1.0 / tau;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      double dot = 0;
      for (int d = 0; d < c; ++d)
        dot += static_cast<double>(queries.at(i, d)) * static_cast<double>(text.at(j, d));
      out.at(i, j) = static_cast<T>(dot * inv_tau);
    }
  return out;
}

template <typename T>
Var alignment_logits(Tape<T>& tape, Var queries, Var text, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("alignment: tau must be positive");
  return tape.scale(tape.matmul(queries, tape.transpose(text)), static_cast<T>(1.0 / tau));
}

// Per-query softmax cross-entropy against class labels, with down-weighted
// background rows; the weighted sum is divided by the number of queries.
template <typename T>
double contrastive_loss_value(const Array<T>& logits, const std::vector<int>& labels,
                              int background_index, double w_noobj) {
  if (logits.ndim() != 2) throw std::invalid_argument("contrastive: want 2-d logits");
  int n = logits.rows(), k = logits.cols();
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("contrastive: label count mismatch");
  double total = 0;
  for (int i = 0; i < n; ++i) {
    int lab = labels[i];
    if (lab < 0 || lab >= k) throw std::invalid_argument("contrastive: label out of range");
    const T* row = &logits.at(i, 0);
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    double lse = std::log(z) + mx;
    double w = lab == background_index ? w_noobj : 1.0;
    total += w * (lse - static_cast<double>(row[lab]));
  }
  return total / n;
}

// Alpha-balanced binary focal loss, mean over mask elements.  Probabilities
// are clamped to 1e-8 inside the logs only.
template <typename T>
double focal_loss_value(const Array<T>& probs, const Array<T>& target, double gamma,
                        double alpha) {
  if (probs.numel() != target.numel())
    throw std::invalid_argument("focal: size mismatch");
  const double eps = 1e-8;
  double total = 0;
  size_t n = probs.numel();
  for (size_t i = 0; i < n; ++i) {
    double p = probs[i];
    if (target[i] > T(0.5))
      total += -alpha * std::pow(1.0 - p, gamma) * std::log(std::max(p, eps));
    else
      total += -(1.0 - alpha) * std::pow(p, gamma) * std::log(std::max(1.0 - p, eps));
  }
  return total / static_cast<double>(n);
}

// Soft Dice loss: 1 - (2*sum(p*g) + s) / (sum(p) + sum(g) + s).
template <typename T>
double dice_loss_value(const Array<T>& probs, const Array<T>& target, double smooth) {
  if (probs.numel() != target.numel()) throw std::invalid_argument("dice: size mismatch");
  double inter = 0, psum = 0, tsum = 0;
  size_t n = probs.numel();
  for (size_t i = 0; i < n; ++i) {
    inter += static_cast<double>(probs[i]) * static_cast<double>(target[i]);
    psum += probs[i];
    tsum += target[i];
  }
  return 1.0 - (2.0 * inter + smooth) / (psum + tsum + smooth);
}

// Labels implied by an assignment: matched queries take their segment's
// class, everything else is background.
inline std::vector<int> assignment_labels(const std::vector<int>& pred_to_gt,
                                          const GroundTruthSet& gt, int background_index) {
  std::vector<int> labels(pred_to_gt.size(), background_index);
  for (size_t i = 0; i < pred_to_gt.size(); ++i) {
    int g = pred_to_gt[i];
    if (g < 0) continue;
    if (g >= gt.count()) throw std::invalid_argument("labels: segment index out of range");
    labels[i] = gt.instances[static_cast<size_t>(g)].class_index;
  }
  return labels;
}

template <typename T>
std::vector<T> ce_weights(const std::vector<int>& labels, int background_index,
                          double w_noobj) {
  std::vector<T> w(labels.size());
  for (size_t i = 0; i < labels.size(); ++i)
    w[i] = labels[i] == background_index ? static_cast<T>(w_noobj) : T(1);
  return w;
}

template <typename T>
struct SampleLoss {
  Var total;        // classification + weighted mask terms
  Var contrastive;  // always valid
  Var focal;        // invalid when the sample has no matched segments
  Var dice;
  int matched = 0;
};

// Assembles one sample's loss on the tape.  logits (N, K+1) are
// temperature-scaled alignment scores, mask_probs (N, H*W) sigmoid mask
// probabilities.  pred_to_gt maps each query to a segment index or -1; mask
// terms average over the matched pairs.  With no matches the loss is the
// classification term alone.
template <typename T>
SampleLoss<T> sample_loss(Tape<T>& tape, Var logits, Var mask_probs,
                          const GroundTruthSet& gt, const std::vector<int>& pred_to_gt,
                          int background_index, const LossConfig& cfg) {
  cfg.validate();
  const int n = tape.value(logits).rows();
  if (static_cast<int>(pred_to_gt.size()) != n)
    throw std::invalid_argument("sample loss: assignment size mismatch");
  if (tape.value(logits).cols() != background_index + 1)
    throw std::invalid_argument("sample loss: logit width != class count");

  SampleLoss<T> out;
  auto labels = assignment_labels(pred_to_gt, gt, background_index);
  out.contrastive = tape.softmax_ce_weighted(
      logits, labels, ce_weights<T>(labels, background_index, cfg.w_noobj));

  std::vector<Var> focals, dices;
  for (int i = 0; i < n; ++i) {
    int g = pred_to_gt[static_cast<size_t>(i)];
    if (g < 0) continue;
    Var row = tape.slice_rows(mask_probs, i, 1);
    Array<T> target = gt.instances[static_cast<size_t>(g)].mask.template cast<T>();
    target.shape = {1, static_cast<int>(target.numel())};
    if (target.numel() != tape.value(row).numel())
      throw std::invalid_argument("sample loss: mask size mismatch");
    focals.push_back(tape.focal_loss_probs(row, target, static_cast<T>(cfg.focal_gamma),
                                           static_cast<T>(cfg.focal_alpha)));
    dices.push_back(tape.dice_loss_probs(row, std::move(target),
                                         static_cast<T>(cfg.dice_smooth)));
  }
  out.matched = static_cast<int>(focals.size());
  out.total = out.contrastive;
  if (out.matched > 0) {
    T inv_m = static_cast<T>(1.0 / out.matched);
    Var fsum = focals[0], dsum = dices[0];
    for (size_t i = 1; i < focals.size(); ++i) {
      fsum = tape.add(fsum, focals[i]);
      dsum = tape.add(dsum, dices[i]);
    }
    out.focal = tape.scale(fsum, inv_m);
    out.dice = tape.scale(dsum, inv_m);
    out.total = tape.add(out.total,
                         tape.add(tape.scale(out.focal, static_cast<T>(cfg.lambda_focal)),
                                  tape.scale(out.dice, static_cast<T>(cfg.lambda_dice))));
  }
  return out;
}

}  // namespace mdseg
