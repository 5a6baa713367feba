#include "cwae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cwae/error.hpp"

namespace cwae {
namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (element_count(shape_) != values_.size()) {
    throw ValidationError("tensor shape does not match value count");
  }
}

std::size_t Tensor::rows() const { return shape_.size() < 2 ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return shape_[0];
  return element_count(shape_) / std::max<std::size_t>(shape_[0], 1);
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor concat_cols(std::span<const Tensor* const> parts) {
  if (parts.empty()) return Tensor::matrix(0, 0);
  const std::size_t rows = parts.front()->rows();
  std::size_t total = 0;
  for (const Tensor* p : parts) {
    if (p->rows() != rows) throw ValidationError("concat_cols: row count mismatch");
    total += p->cols();
  }
  Tensor out = Tensor::matrix(rows, total);
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = out.data() + r * total;
    for (const Tensor* p : parts) {
      const auto src = p->row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

Tensor slice_cols(const Tensor& t, std::size_t offset, std::size_t width) {
  if (offset + width > t.cols()) throw ValidationError("slice_cols: out of range");
  Tensor out = Tensor::matrix(t.rows(), width);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto src = t.row(r).subspan(offset, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace cwae
