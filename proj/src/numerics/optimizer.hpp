#pragma once

#include <map>
#include <span>
#include <unordered_map>

#include "numerics/tensor.hpp"

namespace prectr::num {

// Plain SGD with optional momentum. Each parameter steps at the rate of its
// learning-rate group; groups without a rate are frozen.
class Sgd {
 public:
  explicit Sgd(std::map<LrGroup, double> rates, double momentum = 0.0);

  void step(std::span<ParamTensor* const> params);
  double rate(LrGroup g) const;

 private:
  std::map<LrGroup, double> rates_;
  double momentum_;
  std::unordered_map<const ParamTensor*, Tensor> velocity_;
};

}  // namespace prectr::num
