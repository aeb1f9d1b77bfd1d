#pragma once

#include <functional>
#include <span>

#include "numerics/tape.hpp"

namespace prectr::num {

// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Central differences against the tape gradient. Relative error per
// coordinate is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
// Parameter gradients are overwritten.
GradCheckResult finite_difference_check(const LossBuilder& loss,
                                        std::span<ParamTensor* const> params,
                                        double epsilon = 1e-5);

}  // namespace prectr::num
