#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecguq/common.hpp"

namespace ecguq {

// Dense row-major tensor of doubles, rank 1..3 in practice.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
  bool empty() const { return v_.empty(); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](std::int64_t i) { return v_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return v_[static_cast<std::size_t>(i)]; }

  double& at(std::int64_t i, std::int64_t j) { return v_[static_cast<std::size_t>(i * shape_[1] + j)]; }
  const double& at(std::int64_t i, std::int64_t j) const {
    return v_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    return v_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  const double& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return v_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  // Pointer to row j of batch entry i (rank-3) or row i (rank-2).
  double* row(std::int64_t i) { return v_.data() + i * row_stride(); }
  const double* row(std::int64_t i) const { return v_.data() + i * row_stride(); }

  void fill(double v);
  void zero() { fill(0.0); }
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  // Reinterpret with a new shape of identical element count.
  Tensor reshaped(std::vector<std::int64_t> shape) const;

 private:
  std::int64_t row_stride() const {
    std::int64_t s = 1;
    for (std::size_t d = 1; d < shape_.size(); ++d) s *= shape_[d];
    return s;
  }

  std::vector<std::int64_t> shape_;
  std::vector<double> v_;
};

// y[i] += a * x[i]; the hot loop of the whole engine, kept free of reductions
// so the compiler can vectorize it.
inline void axpy(double a, const double* x, double* y, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const double* a, const double* b, std::int64_t n) {
  // Four independent accumulators: fixed summation order, more ILP.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace ecguq
