#include "ecguq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ecguq {

namespace {
std::int64_t checked_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw ShapeError("tensor: negative extent");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
  v_.assign(static_cast<std::size_t>(checked_count(shape_)), 0.0);
}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), v_(std::move(values)) {
  if (checked_count(shape_) != static_cast<std::int64_t>(v_.size())) {
    throw ShapeError("tensor: value count does not match shape " + shape_str());
  }
}

void Tensor::fill(double v) {
  std::fill(v_.begin(), v_.end(), v);
}

bool Tensor::all_finite() const {
  for (double x : v_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ',';
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

Tensor Tensor::reshaped(std::vector<std::int64_t> shape) const {
  if (checked_count(shape) != size()) {
    throw ShapeError("reshape: element count mismatch");
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.v_ = v_;
  return out;
}

}  // namespace ecguq
