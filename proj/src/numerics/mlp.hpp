#pragma once

#include <span>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "numerics/ops.hpp"

namespace prectr::num {

struct DenseLayer {
  ParamTensor weight;  // out x in
  ParamTensor bias;    // out
  Activation activation = Activation::Linear;
};

// Stack of dense layers; widths = {in, hidden..., out}, one activation per layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, std::span<const std::size_t> widths,
      std::span<const Activation> activations, LrGroup group, Rng& rng);
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  std::size_t in_width() const;
  std::size_t out_width() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<ParamTensor*> params();

 private:
  std::vector<DenseLayer> layers_;
};

// Applies the layers in order, binding each parameter on the tape.
Var mlp_apply(Tape& tape, std::vector<DenseLayer>& layers, Var x);
inline Var mlp_apply(Tape& tape, Mlp& mlp, Var x) { return mlp_apply(tape, mlp.layers(), x); }
// Same computation with the weights recorded as constants (no gradients).
Var mlp_apply(Tape& tape, const std::vector<DenseLayer>& layers, Var x);
inline Var mlp_apply(Tape& tape, const Mlp& mlp, Var x) { return mlp_apply(tape, mlp.layers(), x); }

struct Checkpoint;

// Rebuilds an Mlp saved under `name` (layers name.l0, name.l1, ...).
Mlp mlp_from_checkpoint(const Checkpoint& ckpt, const std::string& name,
                        std::span<const Activation> activations);
void append_mlp(Checkpoint& ckpt, const Mlp& mlp);

// Xavier-uniform weights.
Tensor xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng);
Tensor uniform_tensor(std::size_t rows, std::size_t cols, double limit, Rng& rng);

Activation activation_from_string(const std::string& s);
const char* to_string(Activation a);

}  // namespace prectr::num
