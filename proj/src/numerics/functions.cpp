#include "numerics/functions.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"

namespace prectr::num {

double log_floored(double x) { return std::log(std::max(x, kLogFloor)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> v) {
  require(!v.empty(), ErrorKind::Dimension, "softmax of an empty vector");
  const double mx = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    total += out[i];
  }
  for (auto& o : out) o /= total;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), ErrorKind::Dimension, "kl_divergence: length mismatch");
  require(!p.empty(), ErrorKind::Dimension, "kl_divergence: empty distributions");
  double sum_p = 0.0, sum_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum_p += p[i];
    sum_q += q[i];
  }
  require(std::abs(sum_p - 1.0) <= 1e-6 && std::abs(sum_q - 1.0) <= 1e-6,
          ErrorKind::Precondition, "kl_divergence: inputs must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, ErrorKind::Precondition,
            "kl_divergence: negative probability");
    if (p[i] == 0.0) continue;
    require(q[i] > 0.0, ErrorKind::Divergence,
            "kl_divergence: q has zero mass where p is positive");
    kl += p[i] * (log_floored(p[i]) - log_floored(q[i]));
  }
  // Rounding can leave a tiny negative value when p == q.
  return std::max(kl, 0.0);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::Dimension, "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace prectr::num
