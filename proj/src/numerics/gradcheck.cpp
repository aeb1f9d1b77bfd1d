#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "common/error.hpp"

namespace prectr::num {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  const double v = tape.scalar(loss(tape));
  require(std::isfinite(v), ErrorKind::Numeric, "finite_difference_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult finite_difference_check(const LossBuilder& loss,
                                        std::span<ParamTensor* const> params, double epsilon) {
  require(epsilon > 0.0, ErrorKind::Precondition, "finite_difference_check: epsilon must be > 0");
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi]->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double up = evaluate(loss);
      values[i] = saved - epsilon;
      const double down = evaluate(loss);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_param = pi;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace prectr::num
