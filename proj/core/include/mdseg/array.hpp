#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace mdseg {

// Dense row-major n-d array; the last dimension varies fastest.
template <typename T>
struct Array {
  std::vector<int> shape;
  std::vector<T> data;

  Array() = default;
  explicit Array(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape)) {}
  Array(std::vector<int> s, T fill) : shape(std::move(s)), data(numel_of(shape), fill) {}
  Array(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    assert(numel_of(shape) == data.size());
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
  }

  size_t numel() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int rows() const { return shape[0]; }
  int cols() const { return shape[1]; }
  bool same_shape(const Array& o) const { return shape == o.shape; }

  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }

  T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
  T& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  template <typename U>
  Array<U> cast() const {
    Array<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using ArrayF = Array<float>;
using ArrayD = Array<double>;
using ArrayU8 = Array<uint8_t>;
using ArrayI = Array<int>;

}  // namespace mdseg
