#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "l3rs/error.hpp"

namespace l3rs {

// Dense row-major tensor of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
      : shape(std::move(dims)), data(element_count(shape), fill) {}

  Tensor(std::vector<std::size_t> dims, std::vector<double> values)
      : shape(std::move(dims)), data(std::move(values)) {
    if (element_count(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape product " +
                       std::to_string(element_count(shape)));
    }
  }

  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> values() { return data; }
  std::span<const double> values() const { return data; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool operator==(const Tensor&) const = default;
};

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double l2_norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline double l2_norm(const Tensor& t) { return l2_norm(t.values()); }

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// y += a * x
inline void axpy(double a, const Tensor& x, Tensor& y) {
  if (!x.same_shape(y)) throw ShapeError("axpy shape mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += a * x.data[i];
}

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape, 0.0); }

}  // namespace l3rs
