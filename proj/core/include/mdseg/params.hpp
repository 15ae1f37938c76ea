#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdseg/array.hpp"
#include "mdseg/autodiff.hpp"
#include "mdseg/rng.hpp"

namespace mdseg {

// Named trainable arrays. Iteration follows creation order so optimizer
// updates, serialization, and gradient reductions are deterministic.
template <typename T>
class ParameterStore {
 public:
  Array<T>& create(const std::string& name, std::vector<int> shape) {
    if (params_.count(name))
      throw std::invalid_argument("parameter '" + name + "' already exists");
    order_.push_back(name);
    return params_[name] = Array<T>(std::move(shape), T(0));
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }

  Array<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return it->second;
  }
  const Array<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
    return it->second;
  }

  const std::vector<std::string>& names() const { return order_; }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& name : order_) n += params_.at(name).numel();
    return n;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Array<T>> params_;
};

template <typename T>
using GradMap = std::unordered_map<std::string, Array<T>>;

// Binds store parameters to tape leaves, one leaf per name per tape, and
// harvests their gradients after backward().
template <typename T>
struct ParamBinding {
  Tape<T>* tape;
  const ParameterStore<T>* store;
  std::unordered_map<std::string, Var> bound;
  std::vector<std::string> bound_order;

  ParamBinding(Tape<T>& t, const ParameterStore<T>& s) : tape(&t), store(&s) {}

  Var operator()(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    Var v = tape->leaf(store->get(name));
    bound.emplace(name, v);
    bound_order.push_back(name);
    return v;
  }

  // accumulate this tape's parameter gradients (call after tape->backward())
  void add_grads_to(GradMap<T>& acc) const {
    for (const auto& name : bound_order) {
      const Array<T>& g = tape->grad(bound.at(name));
      if (g.data.empty()) continue;  // parameter unreachable from the loss
      auto it = acc.find(name);
      if (it == acc.end()) {
        acc.emplace(name, g);
      } else {
        Array<T>& a = it->second;
        for (size_t i = 0; i < g.numel(); ++i) a[i] += g[i];
      }
    }
  }
};

// ---- initialization helpers ----

template <typename T>
void init_normal(Array<T>& a, Rng& rng, double stddev, double mean = 0.0) {
  rng.fill_normal(a.data, mean, stddev);
}

template <typename T>
void init_uniform(Array<T>& a, Rng& rng, double lo, double hi) {
  for (auto& x : a.data) x = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void init_xavier_uniform(Array<T>& a, Rng& rng, int fan_in, int fan_out) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  init_uniform(a, rng, -limit, limit);
}

template <typename T>
void init_he_normal(Array<T>& a, Rng& rng, int fan_in) {
  init_normal(a, rng, std::sqrt(2.0 / fan_in));
}

template <typename T>
void init_ones(Array<T>& a) {
  a.fill(T(1));
}

}  // namespace mdseg
