#pragma once

#include <span>
#include <vector>

namespace prectr::num {

// Floor applied to every logarithm argument.
inline constexpr double kLogFloor = 1e-12;

double log_floored(double x);

double sigmoid(double z);

// Max-subtracted softmax over a non-empty vector.
std::vector<double> softmax(std::span<const double> v);

// KL(p || q) in nats, with 0 * ln(0 / q) = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace prectr::num
