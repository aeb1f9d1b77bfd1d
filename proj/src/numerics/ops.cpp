#include "numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "numerics/functions.hpp"

namespace prectr::num {

namespace {

Tape& tape_of(Var v) {
  require(v.tape != nullptr, ErrorKind::Graph, "variable is not attached to a tape");
  return *v.tape;
}

Tape& common_tape(Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::Graph,
          "variables belong to different tapes");
  return *a.tape;
}

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 2) return t;
  return Tensor::matrix(1, t.size(), std::vector<double>(t.values().begin(), t.values().end()));
}

std::size_t rows_of(const Tensor& t) { return t.rank() == 2 ? t.shape()[0] : 1; }

Var unary_elementwise(Var x, double (*f)(double), double (*df)(double x, double y)) {
  Tape& tape = tape_of(x);
  const Tensor& in = tape.value(x);
  Tensor out = Tensor::zeros_like(in);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return tape.record(std::move(out), {x},
                     [x, df](Tape& t, const Tensor& y, const Tensor& gy) {
                       const Tensor& xv = t.value(x);
                       Tensor& gx = t.grad_buffer(x);
                       for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * df(xv[i], y[i]);
                     });
}

}  // namespace

Var matmul_t(Var x, Var w) {
  Tape& tape = common_tape(x, w);
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  require(wv.rank() == 2, ErrorKind::Dimension, "matmul_t: weight must be a matrix");
  const std::size_t batch = rows_of(xv), n = xv.cols(), out_dim = wv.rows();
  require(wv.cols() == n, ErrorKind::Dimension,
          "matmul_t: inner dimensions disagree " + xv.shape_string() + " vs " + wv.shape_string());
  Tensor y({batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xr = xv.values().data() + b * n;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wv.values().data() + o * n;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += xr[k] * wr[k];
      y.at(b, o) = s;
    }
  }
  return tape.record(std::move(y), {x, w},
                     [x, w, batch, n, out_dim](Tape& t, const Tensor&, const Tensor& gy) {
                       const Tensor& xv = t.value(x);
                       const Tensor& wv = t.value(w);
                       if (t.requires_grad(x)) {
                         Tensor& gx = t.grad_buffer(x);
                         for (std::size_t b = 0; b < batch; ++b) {
                           double* gxr = gx.values().data() + b * n;
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const double g = gy.at(b, o);
                             if (g == 0.0) continue;
                             const double* wr = wv.values().data() + o * n;
                             for (std::size_t k = 0; k < n; ++k) gxr[k] += g * wr[k];
                           }
                         }
                       }
                       if (t.requires_grad(w)) {
                         Tensor& gw = t.grad_buffer(w);
                         for (std::size_t b = 0; b < batch; ++b) {
                           const double* xr = xv.values().data() + b * n;
                           for (std::size_t o = 0; o < out_dim; ++o) {
                             const double g = gy.at(b, o);
                             if (g == 0.0) continue;
                             double* gwr = gw.values().data() + o * n;
                             for (std::size_t k = 0; k < n; ++k) gwr[k] += g * xr[k];
                           }
                         }
                       }
                     });
}

Var add_row(Var x, Var bias) {
  Tape& tape = common_tape(x, bias);
  Tensor y = as_matrix(tape.value(x));
  const Tensor& bv = tape.value(bias);
  require(bv.size() == y.cols(), ErrorKind::Dimension,
          "add_row: bias width " + std::to_string(bv.size()) + " vs " + std::to_string(y.cols()));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  return tape.record(std::move(y), {x, bias}, [x, bias](Tape& t, const Tensor&, const Tensor& gy) {
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias);
      for (std::size_t r = 0; r < gy.rows(); ++r) {
        auto row = gy.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var affine(Var x, Var w, Var b) { return add_row(matmul_t(x, w), b); }

Var relu(Var x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return unary_elementwise(
      x, [](double v) { return num::sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Var apply_activation(Var x, Activation act) {
  switch (act) {
    case Activation::Relu: return relu(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Linear: return x;
  }
  return x;
}

Var log(Var x) {
  return unary_elementwise(
      x, [](double v) { return log_floored(v); },
      [](double v, double) { return v > kLogFloor ? 1.0 / v : 0.0; });
}

Var softmax_rows(Var x) {
  Tape& tape = tape_of(x);
  Tensor y = as_matrix(tape.value(x));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    auto s = softmax(row);
    std::copy(s.begin(), s.end(), row.begin());
  }
  return tape.record(std::move(y), {x}, [x](Tape& t, const Tensor& y, const Tensor& gy) {
    Tensor& gx = t.grad_buffer(x);
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < n; ++c) inner += gy.at(r, c) * y.at(r, c);
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y.at(r, c) * (gy.at(r, c) - inner);
    }
  });
}

Var log_softmax_rows(Var x) {
  Tape& tape = tape_of(x);
  Tensor y = as_matrix(tape.value(x));
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (auto& v : row) v -= lse;
  }
  return tape.record(std::move(y), {x}, [x](Tape& t, const Tensor& y, const Tensor& gy) {
    Tensor& gx = t.grad_buffer(x);
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < n; ++c) total += gy.at(r, c);
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += gy.at(r, c) - std::exp(y.at(r, c)) * total;
    }
  });
}

namespace {

template <typename F, typename Ga, typename Gb>
Var binary_elementwise(Var a, Var b, const char* name, F f, Ga ga, Gb gb) {
  Tape& tape = common_tape(a, b);
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require(av.size() == bv.size() && rows_of(av) == rows_of(bv), ErrorKind::Dimension,
          std::string(name) + ": shape mismatch " + av.shape_string() + " vs " + bv.shape_string());
  Tensor y = Tensor::zeros_like(av);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(av[i], bv[i]);
  return tape.record(std::move(y), {a, b}, [a, b, ga, gb](Tape& t, const Tensor&, const Tensor& gy) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& g = t.grad_buffer(a);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * ga(av[i], bv[i]);
    }
    if (t.requires_grad(b)) {
      Tensor& g = t.grad_buffer(b);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * gb(av[i], bv[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var a, double c) {
  Tape& tape = tape_of(a);
  Tensor y = tape.value(a);
  for (auto& v : y.values()) v *= c;
  return tape.record(std::move(y), {a}, [a, c](Tape& t, const Tensor&, const Tensor& gy) {
    Tensor& g = t.grad_buffer(a);
    for (std::size_t i = 0; i < gy.size(); ++i) g[i] += c * gy[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorKind::Dimension, "concat_cols: nothing to concatenate");
  Tape& tape = tape_of(parts.front());
  const std::size_t batch = rows_of(tape.value(parts.front()));
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.tape == &tape, ErrorKind::Graph, "concat_cols: mixed tapes");
    const Tensor& v = tape.value(p);
    require(rows_of(v) == batch, ErrorKind::Dimension, "concat_cols: row counts differ");
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor y({batch, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor& v = tape.value(parts[i]);
    for (std::size_t r = 0; r < batch; ++r) {
      for (std::size_t c = 0; c < widths[i]; ++c) y.at(r, offset + c) = v[r * widths[i] + c];
    }
    offset += widths[i];
  }
  return tape.record(std::move(y), parts,
                     [parts, widths, batch, total](Tape& t, const Tensor&, const Tensor& gy) {
                       std::size_t offset = 0;
                       for (std::size_t i = 0; i < parts.size(); ++i) {
                         if (t.requires_grad(parts[i])) {
                           Tensor& g = t.grad_buffer(parts[i]);
                           for (std::size_t r = 0; r < batch; ++r) {
                             for (std::size_t c = 0; c < widths[i]; ++c) {
                               g[r * widths[i] + c] += gy[r * total + offset + c];
                             }
                           }
                         }
                         offset += widths[i];
                       }
                     });
}

Var row_sum(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& xv = tape.value(x);
  const std::size_t batch = rows_of(xv), n = xv.cols();
  Tensor y({batch, 1});
  for (std::size_t r = 0; r < batch; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += xv[r * n + c];
    y[r] = s;
  }
  return tape.record(std::move(y), {x}, [x, n](Tape& t, const Tensor&, const Tensor& gy) {
    Tensor& g = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i / n];
  });
}

Var sum_all(Var x) {
  Tape& tape = tape_of(x);
  double s = 0.0;
  for (double v : tape.value(x).values()) s += v;
  return tape.record(Tensor({1, 1}, {s}), {x}, [x](Tape& t, const Tensor&, const Tensor& gy) {
    Tensor& g = t.grad_buffer(x);
    for (auto& v : g.values()) v += gy[0];
  });
}

Var mean_all(Var x) {
  const double n = static_cast<double>(tape_of(x).value(x).size());
  return scale(sum_all(x), 1.0 / n);
}

Var clamp(Var x, double lo, double hi) {
  Tape& tape = tape_of(x);
  Tensor y = tape.value(x);
  for (auto& v : y.values()) v = std::clamp(v, lo, hi);
  return tape.record(std::move(y), {x}, [x, lo, hi](Tape& t, const Tensor&, const Tensor& gy) {
    const Tensor& xv = t.value(x);
    Tensor& g = t.grad_buffer(x);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      if (xv[i] > lo && xv[i] < hi) g[i] += gy[i];
    }
  });
}

Var l2_normalize_rows(Var x) {
  Tape& tape = tape_of(x);
  Tensor y = as_matrix(tape.value(x));
  std::vector<double> norms(y.rows());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    double ss = 0.0;
    for (double v : row) ss += v * v;
    norms[r] = std::max(std::sqrt(ss), kLogFloor);
    for (auto& v : row) v /= norms[r];
  }
  return tape.record(std::move(y), {x}, [x, norms](Tape& t, const Tensor& y, const Tensor& gy) {
    Tensor& g = t.grad_buffer(x);
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < n; ++c) inner += y.at(r, c) * gy.at(r, c);
      for (std::size_t c = 0; c < n; ++c) {
        g[r * n + c] += (gy.at(r, c) - y.at(r, c) * inner) / norms[r];
      }
    }
  });
}

Var embedding_bag(Var table, const std::vector<std::vector<std::size_t>>& ids) {
  Tape& tape = tape_of(table);
  const Tensor& tv = tape.value(table);
  require(tv.rank() == 2, ErrorKind::Dimension, "embedding_bag: table must be a matrix");
  require(!ids.empty(), ErrorKind::Dimension, "embedding_bag: empty batch");
  const std::size_t width = tv.cols(), vocab = tv.rows();
  Tensor y({ids.size(), width});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r].empty()) continue;
    const double inv = 1.0 / static_cast<double>(ids[r].size());
    auto out = y.row(r);
    for (std::size_t id : ids[r]) {
      require(id < vocab, ErrorKind::Index,
              "embedding id " + std::to_string(id) + " out of range " + std::to_string(vocab));
      auto src = tv.row(id);
      for (std::size_t c = 0; c < width; ++c) out[c] += src[c] * inv;
    }
  }
  return tape.record(std::move(y), {table}, [table, ids, width](Tape& t, const Tensor&, const Tensor& gy) {
    Tensor& g = t.grad_buffer(table);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r].empty()) continue;
      const double inv = 1.0 / static_cast<double>(ids[r].size());
      auto src = gy.row(r);
      for (std::size_t id : ids[r]) {
        auto dst = g.row(id);
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c] * inv;
      }
    }
  });
}

Var fill_rows(Var x, const std::vector<bool>& mask, double value) {
  Tape& tape = tape_of(x);
  Tensor y = as_matrix(tape.value(x));
  require(mask.size() == y.rows(), ErrorKind::Dimension, "fill_rows: mask length mismatch");
  for (std::size_t r = 0; r < y.rows(); ++r) {
    if (mask[r]) std::fill(y.row(r).begin(), y.row(r).end(), value);
  }
  return tape.record(std::move(y), {x}, [x, mask](Tape& t, const Tensor&, const Tensor& gy) {
    Tensor& g = t.grad_buffer(x);
    const std::size_t n = gy.cols();
    for (std::size_t r = 0; r < mask.size(); ++r) {
      if (mask[r]) continue;
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += gy[r * n + c];
    }
  });
}

namespace {

struct AttentionShape {
  std::size_t batch, width, heads, head_width;
  double inv_sqrt;
};

AttentionShape attention_shape(const Tensor& q, const Tensor& k, std::span<const std::size_t> offsets,
                               std::size_t heads) {
  const std::size_t batch = rows_of(q), width = q.cols();
  require(heads >= 1 && width % heads == 0, ErrorKind::Dimension,
          "attention: width must be divisible by head count");
  require(k.cols() == width, ErrorKind::Dimension, "attention: key width mismatch");
  require(offsets.size() == batch + 1 && offsets.front() == 0 && offsets.back() == rows_of(k),
          ErrorKind::Dimension, "attention: segment offsets do not cover the key rows");
  for (std::size_t b = 0; b < batch; ++b) {
    require(offsets[b] <= offsets[b + 1], ErrorKind::Dimension, "attention: offsets not sorted");
  }
  const std::size_t hw = width / heads;
  return {batch, width, heads, hw, 1.0 / std::sqrt(static_cast<double>(hw))};
}

// Weights for segment b, head h; written to `w`.
void head_weights(const Tensor& q, const Tensor& k, const AttentionShape& s, std::size_t b,
                  std::size_t h, std::size_t begin, std::size_t end, std::vector<double>& w) {
  w.resize(end - begin);
  const double* qr = q.values().data() + b * s.width + h * s.head_width;
  for (std::size_t i = begin; i < end; ++i) {
    const double* kr = k.values().data() + i * s.width + h * s.head_width;
    double score = 0.0;
    for (std::size_t c = 0; c < s.head_width; ++c) score += qr[c] * kr[c];
    w[i - begin] = score * s.inv_sqrt;
  }
  w = softmax(w);
}

}  // namespace

std::vector<std::vector<double>> segment_attention_weights(const Tensor& query, const Tensor& keys,
                                                           std::span<const std::size_t> offsets,
                                                           std::size_t heads) {
  const auto s = attention_shape(query, keys, offsets, heads);
  std::vector<std::vector<double>> out;
  std::vector<double> w;
  for (std::size_t b = 0; b < s.batch; ++b) {
    for (std::size_t h = 0; h < s.heads; ++h) {
      if (offsets[b] == offsets[b + 1]) {
        out.emplace_back();
        continue;
      }
      head_weights(query, keys, s, b, h, offsets[b], offsets[b + 1], w);
      out.push_back(w);
    }
  }
  return out;
}

Var segment_attention(Var query, Var keys, Var values, std::span<const std::size_t> offsets,
                      std::size_t heads) {
  Tape& tape = common_tape(query, keys);
  require(values.tape == &tape, ErrorKind::Graph, "attention: mixed tapes");
  const Tensor& q = tape.value(query);
  const Tensor& k = tape.value(keys);
  const Tensor& v = tape.value(values);
  const auto s = attention_shape(q, k, offsets, heads);
  require(v.cols() == s.width && rows_of(v) == rows_of(k), ErrorKind::Dimension,
          "attention: value shape mismatch");

  Tensor y({s.batch, s.width});
  std::vector<double> w;
  for (std::size_t b = 0; b < s.batch; ++b) {
    const std::size_t begin = offsets[b], end = offsets[b + 1];
    if (begin == end) continue;
    for (std::size_t h = 0; h < s.heads; ++h) {
      head_weights(q, k, s, b, h, begin, end, w);
      double* out = y.values().data() + b * s.width + h * s.head_width;
      for (std::size_t i = begin; i < end; ++i) {
        const double* vr = v.values().data() + i * s.width + h * s.head_width;
        for (std::size_t c = 0; c < s.head_width; ++c) out[c] += w[i - begin] * vr[c];
      }
    }
  }

  std::vector<std::size_t> segs(offsets.begin(), offsets.end());
  return tape.record(
      std::move(y), {query, keys, values},
      [query, keys, values, segs, s](Tape& t, const Tensor&, const Tensor& gy) {
        const Tensor& q = t.value(query);
        const Tensor& k = t.value(keys);
        const Tensor& v = t.value(values);
        Tensor* gq = t.requires_grad(query) ? &t.grad_buffer(query) : nullptr;
        Tensor* gk = t.requires_grad(keys) ? &t.grad_buffer(keys) : nullptr;
        Tensor* gv = t.requires_grad(values) ? &t.grad_buffer(values) : nullptr;
        std::vector<double> w, dw;
        for (std::size_t b = 0; b < s.batch; ++b) {
          const std::size_t begin = segs[b], end = segs[b + 1];
          if (begin == end) continue;
          for (std::size_t h = 0; h < s.heads; ++h) {
            head_weights(q, k, s, b, h, begin, end, w);
            const std::size_t col0 = h * s.head_width;
            const double* g = gy.values().data() + b * s.width + col0;
            dw.assign(end - begin, 0.0);
            double mean_dw = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
              const double* vr = v.values().data() + i * s.width + col0;
              double d = 0.0;
              for (std::size_t c = 0; c < s.head_width; ++c) d += g[c] * vr[c];
              dw[i - begin] = d;
              mean_dw += w[i - begin] * d;
              if (gv) {
                double* gvr = gv->values().data() + i * s.width + col0;
                for (std::size_t c = 0; c < s.head_width; ++c) gvr[c] += w[i - begin] * g[c];
              }
            }
            const double* qr = q.values().data() + b * s.width + col0;
            for (std::size_t i = begin; i < end; ++i) {
              const double ds = w[i - begin] * (dw[i - begin] - mean_dw) * s.inv_sqrt;
              const double* kr = k.values().data() + i * s.width + col0;
              if (gq) {
                double* gqr = gq->values().data() + b * s.width + col0;
                for (std::size_t c = 0; c < s.head_width; ++c) gqr[c] += ds * kr[c];
              }
              if (gk) {
                double* gkr = gk->values().data() + i * s.width + col0;
                for (std::size_t c = 0; c < s.head_width; ++c) gkr[c] += ds * qr[c];
              }
            }
          }
        }
      });
}

Var binary_cross_entropy(Var probs, std::span<const double> labels) {
  Tape& tape = tape_of(probs);
  const Tensor& p = tape.value(probs);
  require(p.size() == labels.size() && !labels.empty(), ErrorKind::Dimension,
          "binary_cross_entropy: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] > 0.0 && p[i] < 1.0, ErrorKind::Validation,
            "binary_cross_entropy: probability outside (0, 1)");
    total += labels[i] * log_floored(p[i]) + (1.0 - labels[i]) * log_floored(1.0 - p[i]);
  }
  const double n = static_cast<double>(p.size());
  std::vector<double> y(labels.begin(), labels.end());
  return tape.record(Tensor({1, 1}, {-total / n}), {probs},
                     [probs, y, n](Tape& t, const Tensor&, const Tensor& gy) {
                       const Tensor& p = t.value(probs);
                       Tensor& g = t.grad_buffer(probs);
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         g[i] += -gy[0] * (y[i] / p[i] - (1.0 - y[i]) / (1.0 - p[i])) / n;
                       }
                     });
}

Var cross_entropy_logits(Var logits, std::span<const std::size_t> labels) {
  Tape& tape = tape_of(logits);
  const Tensor& z = tape.value(logits);
  require(rows_of(z) == labels.size() && !labels.empty(), ErrorKind::Dimension,
          "cross_entropy_logits: row/label count mismatch");
  const std::size_t k = z.cols();
  for (auto l : labels) require(l < k, ErrorKind::Index, "cross_entropy_logits: label out of range");
  Var logp = log_softmax_rows(logits);
  const Tensor& lp = tape.value(logp);
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) total += lp[r * k + labels[r]];
  const double n = static_cast<double>(labels.size());
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return tape.record(Tensor({1, 1}, {-total / n}), {logp},
                     [logp, lab, k, n](Tape& t, const Tensor&, const Tensor& gy) {
                       Tensor& g = t.grad_buffer(logp);
                       for (std::size_t r = 0; r < lab.size(); ++r) g[r * k + lab[r]] -= gy[0] / n;
                     });
}

Var softmax_kl(Var scores, std::span<const double> targets,
               const std::vector<std::vector<std::size_t>>& groups) {
  Tape& tape = tape_of(scores);
  const Tensor& sv = tape.value(scores);
  require(sv.size() == targets.size(), ErrorKind::Dimension, "softmax_kl: length mismatch");
  require(!groups.empty(), ErrorKind::Validation, "softmax_kl: no groups");

  // Per group: target distribution p and model distribution q.
  std::vector<std::vector<double>> ps, qs;
  double total = 0.0;
  for (const auto& grp : groups) {
    require(grp.size() >= 2, ErrorKind::Validation, "softmax_kl: a group needs at least 2 items");
    std::vector<double> t(grp.size()), z(grp.size());
    for (std::size_t i = 0; i < grp.size(); ++i) {
      require(grp[i] < sv.size(), ErrorKind::Index, "softmax_kl: group index out of range");
      t[i] = targets[grp[i]];
      z[i] = sv[grp[i]];
    }
    auto p = softmax(t);
    auto q = softmax(z);
    total += kl_divergence(p, q);
    ps.push_back(std::move(p));
    qs.push_back(std::move(q));
  }
  const double g_count = static_cast<double>(groups.size());
  return tape.record(Tensor({1, 1}, {total / g_count}), {scores},
                     [scores, groups, ps, qs, g_count](Tape& t, const Tensor&, const Tensor& gy) {
                       Tensor& g = t.grad_buffer(scores);
                       for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                         for (std::size_t i = 0; i < groups[gi].size(); ++i) {
                           g[groups[gi][i]] += gy[0] * (qs[gi][i] - ps[gi][i]) / g_count;
                         }
                       }
                     });
}

}  // namespace prectr::num
