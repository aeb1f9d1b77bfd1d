#include "numerics/optimizer.hpp"

#include "common/error.hpp"

namespace prectr::num {

Sgd::Sgd(std::map<LrGroup, double> rates, double momentum)
    : rates_(std::move(rates)), momentum_(momentum) {
  for (const auto& [g, r] : rates_) {
    require(r >= 0.0, ErrorKind::Validation, std::string("negative learning rate for ") + to_string(g));
  }
  require(momentum_ >= 0.0 && momentum_ < 1.0, ErrorKind::Validation, "momentum must be in [0, 1)");
}

double Sgd::rate(LrGroup g) const {
  auto it = rates_.find(g);
  return it == rates_.end() ? 0.0 : it->second;
}

void Sgd::step(std::span<ParamTensor* const> params) {
  for (ParamTensor* p : params) {
    const double lr = rate(p->group);
    if (lr == 0.0) continue;
    auto value = p->value.values();
    auto grad = p->grad.values();
    if (momentum_ == 0.0) {
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
      continue;
    }
    auto [it, inserted] = velocity_.try_emplace(p, Tensor::zeros_like(p->value));
    auto vel = it->second.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      vel[i] = momentum_ * vel[i] + grad[i];
      value[i] -= lr * vel[i];
    }
  }
}

}  // namespace prectr::num
