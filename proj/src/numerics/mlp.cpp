#include "numerics/mlp.hpp"

#include <cmath>

#include "common/error.hpp"
#include "numerics/checkpoint.hpp"

namespace prectr::num {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  return uniform_tensor(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

Mlp::Mlp(const std::string& name, std::span<const std::size_t> widths,
         std::span<const Activation> activations, LrGroup group, Rng& rng) {
  require(widths.size() >= 2, ErrorKind::Dimension, "mlp needs at least an input and output width");
  require(activations.size() + 1 == widths.size(), ErrorKind::Dimension,
          "mlp needs one activation per layer");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const std::string prefix = name + ".l" + std::to_string(i);
    layers_.push_back(DenseLayer{
        ParamTensor(prefix + ".w", xavier_uniform(widths[i + 1], widths[i], rng), group),
        ParamTensor(prefix + ".b", Tensor({widths[i + 1]}, 0.0), group), activations[i]});
  }
}

std::size_t Mlp::in_width() const { return layers_.empty() ? 0 : layers_.front().weight.value.cols(); }
std::size_t Mlp::out_width() const { return layers_.empty() ? 0 : layers_.back().weight.value.rows(); }

std::vector<ParamTensor*> Mlp::params() {
  std::vector<ParamTensor*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

namespace {

template <typename Layers, typename Bind>
Var apply_layers(Layers& layers, Var x, Bind&& bind) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (i > 0) {
      require(l.weight.value.cols() == layers[i - 1].weight.value.rows(), ErrorKind::Dimension,
              "mlp layer widths do not chain at layer " + std::to_string(i));
    }
    x = affine(x, bind(l.weight), bind(l.bias));
    x = apply_activation(x, l.activation);
  }
  return x;
}

}  // namespace

Var mlp_apply(Tape& tape, std::vector<DenseLayer>& layers, Var x) {
  return apply_layers(layers, x, [&](ParamTensor& p) { return tape.parameter(p); });
}

Var mlp_apply(Tape& tape, const std::vector<DenseLayer>& layers, Var x) {
  return apply_layers(layers, x, [&](const ParamTensor& p) { return tape.constant(p.value); });
}

Mlp mlp_from_checkpoint(const Checkpoint& ckpt, const std::string& name,
                        std::span<const Activation> activations) {
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const std::string prefix = name + ".l" + std::to_string(i);
    layers.push_back(DenseLayer{ckpt.find(prefix + ".w"), ckpt.find(prefix + ".b"), activations[i]});
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    require(layers[i].weight.value.cols() == layers[i - 1].weight.value.rows(), ErrorKind::Dimension,
            "checkpoint mlp '" + name + "' widths do not chain");
  }
  return Mlp(std::move(layers));
}

void append_mlp(Checkpoint& ckpt, const Mlp& mlp) {
  for (const auto& l : mlp.layers()) {
    ckpt.params.push_back(l.weight);
    ckpt.params.push_back(l.bias);
  }
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  if (s == "sigmoid") return Activation::Sigmoid;
  fail(ErrorKind::Validation, "unknown activation '" + s + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "linear";
}

}  // namespace prectr::num
