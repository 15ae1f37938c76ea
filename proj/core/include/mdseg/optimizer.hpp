#pragma once

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mdseg/params.hpp"

namespace mdseg {

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  int steps = 4000;
  int warmup = 100;
  int batch_size = 8;
  double clip_norm = 0.0;  // 0 disables clipping
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void validate() const {
    if (lr <= 0) throw std::invalid_argument("optim: lr must be positive");
    if (weight_decay < 0) throw std::invalid_argument("optim: weight decay must be >= 0");
    if (poly_power <= 0) throw std::invalid_argument("optim: poly power must be positive");
    if (steps < 1) throw std::invalid_argument("optim: steps must be >= 1");
    if (warmup < 0 || warmup >= steps)
      throw std::invalid_argument("optim: warmup must lie in [0, steps)");
    if (batch_size < 1) throw std::invalid_argument("optim: batch size must be >= 1");
    if (clip_norm < 0) throw std::invalid_argument("optim: clip norm must be >= 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1 || eps <= 0)
      throw std::invalid_argument("optim: bad adam constants");
  }
};

// Polynomial decay to zero with optional linear warmup. step counts from 0;
// the rate reaches exactly 0 at step == steps.
inline double poly_lr(const OptimConfig& cfg, int step) {
  if (step < 0) throw std::invalid_argument("poly_lr: negative step");
  if (step >= cfg.steps) return 0.0;
  if (step < cfg.warmup) return cfg.lr * (step + 1) / cfg.warmup;
  double progress = static_cast<double>(step - cfg.warmup) / (cfg.steps - cfg.warmup);
  return cfg.lr * std::pow(1.0 - progress, cfg.poly_power);
}

// Global L2 norm of the gradients, accumulated in parameter creation order.
template <typename T>
double global_grad_norm(const ParameterStore<T>& store, const GradMap<T>& grads) {
  double sq = 0.0;
  for (const auto& name : store.names()) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    for (T g : it->second.data) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

// Scales gradients so their global norm is at most max_norm; returns the
// pre-clip norm. max_norm <= 0 is a no-op.
template <typename T>
double clip_grad_norm(const ParameterStore<T>& store, GradMap<T>& grads, double max_norm) {
  double norm = global_grad_norm(store, grads);
  if (max_norm > 0 && norm > max_norm) {
    T scale = static_cast<T>(max_norm / norm);
    for (auto& [name, g] : grads)
      for (T& x : g.data) x *= scale;
  }
  return norm;
}

// Decoupled weight decay Adam. Parameters without a gradient entry are left
// untouched (no decay, no moment update).
template <typename T>
class AdamW {
 public:
  AdamW(ParameterStore<T>& store, OptimConfig cfg) : store_(&store), cfg_(cfg) {
    cfg_.validate();
  }

  int iterations() const { return t_; }

  void step(const GradMap<T>& grads, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& name : store_->names()) {
      auto it = grads.find(name);
      if (it == grads.end()) continue;
      Array<T>& theta = store_->get(name);
      const Array<T>& g = it->second;
      if (!theta.same_shape(g))
        throw std::invalid_argument("adamw: gradient shape mismatch for '" + name + "'");
      Array<T>& m = state(m_, name, theta);
      Array<T>& v = state(v_, name, theta);
      for (size_t i = 0; i < theta.numel(); ++i) {
        double gi = g[i];
        double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        theta[i] = static_cast<T>(theta[i] - lr * (update + cfg_.weight_decay * theta[i]));
      }
    }
  }

 private:
  Array<T>& state(std::unordered_map<std::string, Array<T>>& pool, const std::string& name,
                  const Array<T>& like) {
    auto it = pool.find(name);
    if (it == pool.end()) it = pool.emplace(name, Array<T>(like.shape, T(0))).first;
    return it->second;
  }

  ParameterStore<T>* store_;
  OptimConfig cfg_;
  int t_ = 0;
  std::unordered_map<std::string, Array<T>> m_, v_;
};

}  // namespace mdseg
