#include "encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "common/text.hpp"
#include "numerics/functions.hpp"
#include "numerics/optimizer.hpp"

namespace prectr::encoder {

using num::Activation;
using num::LrGroup;
using num::ParamTensor;
using num::Tensor;
using num::Var;

namespace {

constexpr Activation kReductionActs[] = {Activation::Relu, Activation::Relu, Activation::Linear};
constexpr Activation kHeadActs[] = {Activation::Linear};

std::vector<std::size_t> row_ids(const std::vector<TokenId>& tokens, TokenId sentinel) {
  std::vector<std::size_t> ids;
  if (tokens.empty()) {
    ids.push_back(sentinel.value);
    return ids;
  }
  ids.reserve(tokens.size());
  for (auto t : tokens) ids.push_back(t.value);
  return ids;
}

// Dense layer on one row, same summation order as num::affine.
std::vector<double> dense(const num::DenseLayer& layer, const std::vector<double>& x) {
  const Tensor& w = layer.weight.value;
  std::vector<double> y(w.rows());
  for (std::size_t o = 0; o < w.rows(); ++o) {
    auto wr = w.row(o);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * wr[k];
    y[o] = s;
  }
  for (std::size_t o = 0; o < y.size(); ++o) y[o] += layer.bias.value[o];
  if (layer.activation == Activation::Relu) {
    for (auto& v : y) v = v > 0.0 ? v : 0.0;
  } else if (layer.activation == Activation::Sigmoid) {
    for (auto& v : y) v = num::sigmoid(v);
  }
  return y;
}

template <typename Example, typename LossFn>
TrainTrace run_epochs(const std::vector<Example>& examples, std::size_t epochs, std::size_t batch_size,
                      std::uint64_t seed, EncoderParams& params, num::Sgd& sgd, LossFn&& batch_loss) {
  TrainTrace trace;
  if (epochs == 0 || examples.empty()) return trace;
  require(batch_size >= 1, ErrorKind::Validation, "encoder batch size must be positive");
  Rng rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  auto params_list = params.all_params();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::vector<const Example*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[order[i]]);
      for (auto* p : params_list) p->zero_grad();
      num::Tape tape;
      Var loss = batch_loss(tape, batch);
      const double value = tape.scalar(loss);
      require(std::isfinite(value), ErrorKind::Training, "encoder training produced a non-finite loss");
      tape.backward(loss);
      sgd.step(params_list);
      total += value * static_cast<double>(batch.size());
    }
    trace.epoch_losses.push_back(total / static_cast<double>(examples.size()));
  }
  trace.final_loss = trace.epoch_losses.back();
  return trace;
}

}  // namespace

std::vector<TokenId> tokenize(std::string_view text, std::size_t vocab_size) {
  require(vocab_size > 0, ErrorKind::Validation, "vocab_size must be positive");
  std::vector<TokenId> out;
  for (const auto& tok : split_whitespace(to_lower(text))) {
    out.push_back(TokenId{static_cast<std::uint32_t>(fnv1a64(tok) % vocab_size)});
  }
  return out;
}

EncoderParams::EncoderParams(const EncoderConfig& config, Rng& rng) : vocab_size_(config.vocab_size) {
  require(config.vocab_size > 0 && config.raw_dim > 0 && config.dim > 0, ErrorKind::Validation,
          "encoder dimensions must be positive");
  token_table_ = ParamTensor("enc.tokens",
                             num::uniform_tensor(config.vocab_size + 3, config.raw_dim, 0.5, rng),
                             LrGroup::Stage1);
  const std::size_t widths[] = {config.raw_dim, config.raw_dim, config.dim, config.dim};
  reduction_ = num::Mlp("enc.reduce", widths, kReductionActs, LrGroup::Stage1, rng);
  const std::size_t rel[] = {config.dim, 1};
  relevance_head_ = num::Mlp("enc.relevance_head", rel, kHeadActs, LrGroup::Stage1, rng);
  const std::size_t lvl[] = {config.dim, 4};
  level_head_ = num::Mlp("enc.level_head", lvl, kHeadActs, LrGroup::Stage1, rng);
}

std::vector<TokenId> EncoderParams::pair_tokens(std::string_view query, std::string_view item) const {
  std::vector<TokenId> out{cls()};
  for (auto t : tokenize(query, vocab_size_)) out.push_back(t);
  out.push_back(sep());
  for (auto t : tokenize(item, vocab_size_)) out.push_back(t);
  out.push_back(sep());
  return out;
}

std::vector<double> EncoderParams::encode_tokens(const std::vector<TokenId>& tokens) const {
  const auto ids = row_ids(tokens, empty_sentinel());
  const std::size_t width = token_table_.value.cols();
  std::vector<double> pooled(width, 0.0);
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (std::size_t id : ids) {
    require(id < token_table_.value.rows(), ErrorKind::Index, "token id out of range");
    auto src = token_table_.value.row(id);
    for (std::size_t c = 0; c < width; ++c) pooled[c] += src[c] * inv;
  }
  for (const auto& layer : reduction_.layers()) pooled = dense(layer, pooled);
  double ss = 0.0;
  for (double v : pooled) ss += v * v;
  const double norm = std::max(std::sqrt(ss), num::kLogFloor);
  for (auto& v : pooled) v /= norm;
  return pooled;
}

Var EncoderParams::encode_batch(num::Tape& tape, const std::vector<std::vector<TokenId>>& rows) {
  std::vector<std::vector<std::size_t>> ids;
  ids.reserve(rows.size());
  for (const auto& r : rows) ids.push_back(row_ids(r, empty_sentinel()));
  Var pooled = num::embedding_bag(tape.parameter(token_table_), ids);
  return num::l2_normalize_rows(num::mlp_apply(tape, reduction_, pooled));
}

std::vector<ParamTensor*> EncoderParams::encoder_params() {
  std::vector<ParamTensor*> out{&token_table_};
  for (auto* p : reduction_.params()) out.push_back(p);
  return out;
}

std::vector<ParamTensor*> EncoderParams::all_params() {
  auto out = encoder_params();
  for (auto* p : relevance_head_.params()) out.push_back(p);
  for (auto* p : level_head_.params()) out.push_back(p);
  return out;
}

num::Checkpoint EncoderParams::to_checkpoint() const {
  num::Checkpoint ckpt;
  ckpt.meta["kind"] = "encoder";
  ckpt.meta["vocab_size"] = std::to_string(vocab_size_);
  ckpt.params.push_back(token_table_);
  num::append_mlp(ckpt, reduction_);
  num::append_mlp(ckpt, relevance_head_);
  num::append_mlp(ckpt, level_head_);
  return ckpt;
}

EncoderParams EncoderParams::from_checkpoint(const num::Checkpoint& ckpt) {
  auto kind = ckpt.meta.find("kind");
  require(kind != ckpt.meta.end() && kind->second == "encoder", ErrorKind::Dependency,
          "checkpoint is not an encoder checkpoint");
  EncoderParams p;
  p.vocab_size_ = static_cast<std::size_t>(parse_int(ckpt.meta.at("vocab_size")));
  p.token_table_ = ckpt.find("enc.tokens");
  require(p.token_table_.value.rank() == 2 && p.token_table_.value.rows() == p.vocab_size_ + 3,
          ErrorKind::Dimension, "encoder token table has the wrong row count");
  p.reduction_ = num::mlp_from_checkpoint(ckpt, "enc.reduce", kReductionActs);
  p.relevance_head_ = num::mlp_from_checkpoint(ckpt, "enc.relevance_head", kHeadActs);
  p.level_head_ = num::mlp_from_checkpoint(ckpt, "enc.level_head", kHeadActs);
  require(p.reduction_.in_width() == p.raw_dim(), ErrorKind::Dimension,
          "encoder reduction input does not match the token table width");
  return p;
}

std::string EncoderParams::checkpoint_id() const {
  num::Checkpoint c;
  c.params.push_back(token_table_);
  num::append_mlp(c, reduction_);
  return hex64(fnv1a64(num::serialize_checkpoint(c)));
}

TextEmbedding encode_text(std::string_view text, const EncoderParams& params) {
  return TextEmbedding{params.encode_tokens(tokenize(text, params.vocab_size()))};
}

RelevanceEmbedding encode_pair(std::string_view query, std::string_view item,
                               const EncoderParams& params) {
  return RelevanceEmbedding{params.encode_tokens(params.pair_tokens(query, item))};
}

TrainTrace pretrain_encoder(const std::vector<ClickPair>& pairs, const EncoderConfig& config,
                            EncoderParams& params) {
  require(!pairs.empty(), ErrorKind::Training, "encoder pretraining needs at least one pair");
  const auto positives = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.clicked; });
  require(positives > 0 && positives < static_cast<long>(pairs.size()), ErrorKind::Training,
          "encoder pretraining needs both clicked and unclicked pairs");
  num::Sgd sgd({{LrGroup::Stage1, config.learning_rate}});
  return run_epochs(pairs, config.pretrain_epochs, config.batch_size, config.seed, params, sgd,
                    [&](num::Tape& tape, const std::vector<const ClickPair*>& batch) {
                      std::vector<std::vector<TokenId>> rows;
                      std::vector<double> labels;
                      for (const auto* p : batch) {
                        rows.push_back(params.pair_tokens(p->query, p->item));
                        labels.push_back(p->clicked ? 1.0 : 0.0);
                      }
                      Var logits = num::mlp_apply(tape, params.relevance_head(), params.encode_batch(tape, rows));
                      Var probs = num::clamp(num::sigmoid(logits), 1e-7, 1.0 - 1e-7);
                      return num::binary_cross_entropy(probs, labels);
                    });
}

namespace {

Var level_batch_loss(num::Tape& tape, EncoderParams& params, const std::vector<const LabeledPair*>& batch) {
  std::vector<std::vector<TokenId>> rows;
  std::vector<std::size_t> labels;
  for (const auto* p : batch) {
    rows.push_back(params.pair_tokens(p->query, p->item));
    labels.push_back(static_cast<std::size_t>(p->level - 1));
  }
  Var logits = num::mlp_apply(tape, params.level_head(), params.encode_batch(tape, rows));
  return num::cross_entropy_logits(logits, labels);
}

}  // namespace

TrainTrace finetune_encoder(EncoderParams& params, const std::vector<LabeledPair>& pairs,
                            const EncoderConfig& config) {
  for (const auto& p : pairs) {
    require(p.level >= 1 && p.level <= 4, ErrorKind::Validation,
            "relevance label " + std::to_string(p.level) + " outside 1..4");
  }
  const double lr = config.learning_rate * config.finetune_lr_factor;
  require(lr >= 0.0, ErrorKind::Validation, "fine-tune learning rate must be nonnegative");
  if (lr == 0.0) return {};
  num::Sgd sgd({{LrGroup::Stage1, lr}});
  return run_epochs(pairs, config.finetune_epochs, config.batch_size, config.seed + 1, params, sgd,
                    [&](num::Tape& tape, const std::vector<const LabeledPair*>& batch) {
                      return level_batch_loss(tape, params, batch);
                    });
}

double level_loss(EncoderParams& params, const std::vector<LabeledPair>& pairs) {
  require(!pairs.empty(), ErrorKind::Validation, "level_loss on an empty set");
  std::vector<const LabeledPair*> batch;
  for (const auto& p : pairs) batch.push_back(&p);
  num::Tape tape;
  return tape.scalar(level_batch_loss(tape, params, batch));
}

int predict_level(const EncoderParams& params, std::string_view query, std::string_view item) {
  auto emb = params.encode_tokens(params.pair_tokens(query, item));
  auto logits = dense(params.level_head().layers().front(), emb);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()) + 1;
}

bool predict_relevant(const EncoderParams& params, std::string_view query, std::string_view item) {
  auto emb = params.encode_tokens(params.pair_tokens(query, item));
  return dense(params.relevance_head().layers().front(), emb)[0] > 0.0;
}

}  // namespace prectr::encoder
