#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "numerics/tape.hpp"

// Differentiable operations over 2-D tensors recorded on a Tape. Row b of a
// B x n tensor is sample b of a batch; rank-1 inputs behave as a single row.
namespace prectr::num {

enum class Activation { Linear, Relu, Sigmoid };

// x (B x n) times W^T (W is out x n) -> B x out.
Var matmul_t(Var x, Var w);
// Adds bias (n, or 1 x n) to every row of x (B x n).
Var add_row(Var x, Var bias);
// W x + b per row.
Var affine(Var x, Var w, Var b);

Var relu(Var x);
Var sigmoid(Var x);
Var apply_activation(Var x, Activation act);
// log(max(x, kLogFloor)); the gradient is zero where the floor is active.
Var log(Var x);

Var softmax_rows(Var x);
Var log_softmax_rows(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);

// Column-wise concatenation; all inputs share a row count.
Var concat_cols(const std::vector<Var>& parts);
// B x n -> B x 1.
Var row_sum(Var x);
// Any shape -> 1 x 1.
Var sum_all(Var x);
Var mean_all(Var x);

Var clamp(Var x, double lo, double hi);
Var l2_normalize_rows(Var x);

// One output row per id list: the mean of the listed table rows, or zeros
// for an empty list. Duplicated ids count with multiplicity.
Var embedding_bag(Var table, const std::vector<std::vector<std::size_t>>& ids);

// Rows of x flagged in `mask` are replaced by `value`; those rows pass no
// gradient back.
Var fill_rows(Var x, const std::vector<bool>& mask, double value);

// Target attention over variable-length segments. Query row b attends to
// key/value rows [offsets[b], offsets[b+1]). With `heads` > 1 the feature
// axis is split into equal slices attended independently and concatenated.
// Scores are scaled by 1/sqrt(slice width). Empty segments yield zero rows.
Var segment_attention(Var query, Var keys, Var values,
                      std::span<const std::size_t> offsets, std::size_t heads);

// Per-segment attention weights (forward only, for inspection and tests).
std::vector<std::vector<double>> segment_attention_weights(
    const Tensor& query, const Tensor& keys, std::span<const std::size_t> offsets,
    std::size_t heads);

// -(1/n) sum [y log p + (1-y) log(1-p)] for p of shape n x 1; every p must lie
// strictly inside (0, 1).
Var binary_cross_entropy(Var probs, std::span<const double> labels);

// -(1/n) sum log softmax(logits_i)[label_i]; labels are 0-based class indices.
Var cross_entropy_logits(Var logits, std::span<const std::size_t> labels);

// Mean over groups of KL(softmax(targets[g]) || softmax(scores[g])). Targets
// are constants; scores is an n x 1 (or length n) node.
Var softmax_kl(Var scores, std::span<const double> targets,
               const std::vector<std::vector<std::size_t>>& groups);

}  // namespace prectr::num
