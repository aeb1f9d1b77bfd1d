#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace prectr::num {

// Dense row-major float64 array. Rank 1 and rank 2 are the only ranks the
// model uses; rank-1 tensors act as 1 x n rows where a matrix is expected.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, 0.0); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

enum class LrGroup { Stage1, Base, RslFinetune, Prim };

const char* to_string(LrGroup g);
LrGroup lr_group_from_string(const std::string& s);

// A learnable tensor with its accumulated gradient.
struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor grad;
  LrGroup group = LrGroup::Base;

  ParamTensor() = default;
  ParamTensor(std::string name, Tensor value, LrGroup group);

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace prectr::num
