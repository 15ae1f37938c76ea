#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace mdseg {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic generator with explicitly coded distributions, so streams are
// reproducible across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), state_(seed) {
    // decorrelate trivial seeds
    for (int i = 0; i < 2; ++i) splitmix64(state_);
  }

  uint64_t seed() const { return seed_; }
  uint64_t next_u64() { return splitmix64(state_); }

  // substream derived from the original seed, independent of draw position
  Rng fork(uint64_t stream) const { return Rng(mix64(seed_, stream)); }
  Rng fork(const std::string& name) const { return fork(fnv1a64(name)); }

  uint32_t next_below(uint32_t bound) {
    // Lemire's multiply-shift; bound > 0
    uint64_t x = next_u64() >> 32;
    return static_cast<uint32_t>((x * bound) >> 32);
  }

  int uniform_int(int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(next_below(static_cast<uint32_t>(hi - lo + 1)));
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void fill_normal(std::vector<T>& v, double mean, double stddev) {
    for (auto& x : v) x = static_cast<T>(mean + stddev * normal());
  }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
      auto j = static_cast<decltype(i)>(next_below(static_cast<uint32_t>(i + 1)));
      std::swap(first[i], first[j]);
    }
  }

 private:
  uint64_t seed_;
  uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace mdseg
