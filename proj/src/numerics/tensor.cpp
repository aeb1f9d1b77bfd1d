#include "numerics/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "common/error.hpp"

namespace prectr::num {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  require(!shape.empty() && shape.size() <= 2, ErrorKind::Dimension,
          "tensor rank must be 1 or 2");
  for (auto e : shape) require(e > 0, ErrorKind::Dimension, "tensor extents must be positive");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  require(product(shape_) == values_.size(), ErrorKind::Dimension,
          "tensor value count does not match shape " + shape_string());
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
std::size_t Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(values_).subspan(r * cols(), cols());
}

std::span<double> Tensor::row(std::size_t r) {
  return std::span<double>(values_).subspan(r * cols(), cols());
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

const char* to_string(LrGroup g) {
  switch (g) {
    case LrGroup::Stage1: return "stage1";
    case LrGroup::Base: return "base";
    case LrGroup::RslFinetune: return "rsl-finetune";
    case LrGroup::Prim: return "prim";
  }
  return "base";
}

LrGroup lr_group_from_string(const std::string& s) {
  if (s == "stage1") return LrGroup::Stage1;
  if (s == "base") return LrGroup::Base;
  if (s == "rsl-finetune") return LrGroup::RslFinetune;
  if (s == "prim") return LrGroup::Prim;
  fail(ErrorKind::Parse, "unknown learning-rate group '" + s + "'");
}

ParamTensor::ParamTensor(std::string n, Tensor v, LrGroup g)
    : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), group(g) {}

}  // namespace prectr::num
