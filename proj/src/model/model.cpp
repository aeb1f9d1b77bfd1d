#include "model/model.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <sstream>
#include <thread>
#include <type_traits>
#include <unordered_map>

#include "common/error.hpp"
#include "common/text.hpp"
#include "numerics/functions.hpp"

namespace prectr::model {

using num::Activation;
using num::LrGroup;
using num::ParamTensor;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

constexpr double kFieldInitLimit = 0.05;

std::vector<Activation> hidden_then_linear(std::size_t hidden) {
  std::vector<Activation> acts(hidden, Activation::Relu);
  acts.push_back(Activation::Linear);
  return acts;
}

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  if (s == "none") return out;
  for (auto part : split(s, ',')) out.push_back(static_cast<std::size_t>(parse_int(part)));
  return out;
}

const std::string& meta_at(const num::Checkpoint& ckpt, const std::string& key) {
  auto it = ckpt.meta.find(key);
  require(it != ckpt.meta.end(), ErrorKind::Parse, "model checkpoint is missing meta '" + key + "'");
  return it->second;
}

template <class P>
Var bind(Tape& tape, P& p) {
  if constexpr (std::is_const_v<P>) {
    return tape.constant(p.value);
  } else {
    return tape.parameter(p);
  }
}

Tensor ones(std::size_t rows) { return Tensor({rows, 1}, 1.0); }

void check_context(const PreferenceContext& ctx, std::size_t d) {
  require(ctx.history_queries.size() == ctx.history_pairs.size(), ErrorKind::Dimension,
          "history query and pair sequences differ in length");
  require(ctx.query.values.size() == d, ErrorKind::Dimension, "query embedding width mismatch");
  for (std::size_t i = 0; i < ctx.history_queries.size(); ++i) {
    require(ctx.history_queries[i].values.size() == d && ctx.history_pairs[i].values.size() == d,
            ErrorKind::Dimension, "history embedding width mismatch");
  }
}

Tensor stack_rows(const std::vector<const std::vector<double>*>& rows, std::size_t d) {
  std::vector<double> v;
  v.reserve(rows.size() * d);
  for (const auto* r : rows) v.insert(v.end(), r->begin(), r->end());
  return Tensor::matrix(rows.size(), d, std::move(v));
}

template <class P>
Forward forward_impl(Tape& tape, P& params, const Batch& batch) {
  const auto& cfg = params.config;
  const std::size_t d = cfg.text_dim;
  require(batch.size > 0, ErrorKind::Validation, "empty batch");
  require(batch.query_emb.cols() == d, ErrorKind::Dimension,
          "embedding width " + std::to_string(batch.query_emb.cols()) + " does not match model text_dim " +
              std::to_string(d));
  require(batch.field_ids.size() == params.field_tables.size(), ErrorKind::Dimension,
          "batch field count does not match the model schema");

  Forward out;
  Var flags = tape.constant(batch.flags);
  Var r_cur = tape.constant(batch.pair_emb);

  std::vector<Var> base_parts;
  for (std::size_t f = 0; f < params.field_tables.size(); ++f) {
    base_parts.push_back(num::embedding_bag(bind(tape, params.field_tables[f]), batch.field_ids[f]));
  }
  base_parts.push_back(flags);
  if (cfg.base_uses_relevance_embedding) base_parts.push_back(r_cur);
  Var base_logits = num::mlp_apply(tape, params.base, num::concat_cols(base_parts));
  if (cfg.wide) {
    base_logits = num::add(base_logits, num::affine(flags, bind(tape, params.wide_w), bind(tape, params.wide_b)));
  }
  out.base_probs = num::sigmoid(base_logits);

  if (cfg.base_only) {
    out.fused = out.base_probs;
    out.tau = tape.constant(ones(batch.size));
    out.final_score = num::clamp(out.fused, kScoreFloor, 1.0 - kScoreFloor);
    return out;
  }

  Var rsl_in = num::concat_cols({flags, tape.constant(batch.query_emb), tape.constant(batch.item_emb), r_cur});
  out.rsl_logits = num::mlp_apply(tape, params.rsl, rsl_in);
  out.rsl_probs = num::softmax_rows(out.rsl_logits);
  out.has_rsl = true;
  out.fused = num::row_sum(num::mul(out.base_probs, out.rsl_probs));

  const bool any_history = batch.offsets.back() > 0;
  if (cfg.use_prim && any_history) {
    Var q = num::matmul_t(tape.constant(batch.query_emb), bind(tape, params.attention.w_q));
    Var k = num::matmul_t(tape.constant(batch.history_query), bind(tape, params.attention.w_k));
    Var v = num::matmul_t(tape.constant(batch.history_pair), bind(tape, params.attention.w_v));
    Var r_expect = num::segment_attention(q, k, v, batch.offsets, params.attention.heads);
    Var z = num::mlp_apply(tape, params.incentive, num::concat_cols({r_cur, r_expect}));
    out.tau = num::fill_rows(num::scale(num::sigmoid(z), 2.0), batch.cold, 1.0);
  } else {
    out.tau = tape.constant(ones(batch.size));
  }
  out.final_score = num::clamp(num::mul(out.tau, out.fused), kScoreFloor, 1.0 - kScoreFloor);
  return out;
}

ScoreBreakdown breakdown_row(const Tape& tape, const Forward& f, std::size_t b) {
  ScoreBreakdown s;
  const Tensor& g = tape.value(f.base_probs);
  if (f.has_rsl) {
    const Tensor& t = tape.value(f.rsl_probs);
    for (std::size_t i = 0; i < kLevels; ++i) {
      s.base_out.probs[i] = g.at(b, i);
      s.rsl_out.probs[i] = t.at(b, i);
    }
  } else {
    // Base-only: one head shared by all levels, uniform level distribution.
    s.base_out.probs.fill(g.at(b, 0));
    s.rsl_out.probs.fill(1.0 / static_cast<double>(kLevels));
  }
  s.fused = tape.value(f.fused).at(b, 0);
  s.tau = tape.value(f.tau).at(b, 0);
  s.final_score = tape.value(f.final_score).at(b, 0);
  return s;
}

ScoreBreakdown score_single(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                            const ModelParams& params) {
  EncodedDataset ds({sample}, index, params.schema);
  const EncodedSample* row = &ds[0];
  Batch batch = make_batch(std::span<const EncodedSample* const>(&row, 1));
  Tape tape;
  Forward f = forward(tape, params, batch);
  return breakdown_row(tape, f, 0);
}

}  // namespace

void validate(const ModelConfig& c) {
  require(c.field_dim > 0 && c.text_dim > 0, ErrorKind::Validation, "model widths must be positive");
  require(c.user_buckets > 0 && c.item_buckets > 0 && c.category_buckets > 0 && c.descriptor_buckets > 0,
          ErrorKind::Validation, "feature bucket counts must be positive");
  require(c.heads > 0 && c.text_dim % c.heads == 0, ErrorKind::Validation,
          "text_dim must be divisible by the head count");
  auto positive = [](const std::vector<std::size_t>& v) {
    return std::all_of(v.begin(), v.end(), [](std::size_t w) { return w > 0; });
  };
  require(positive(c.base_hidden) && positive(c.rsl_hidden) && positive(c.incentive_hidden),
          ErrorKind::Validation, "hidden layer widths must be positive");
}

std::string serialize(const ScoreBreakdown& b) {
  std::ostringstream os;
  os << format_exact(b.final_score) << '\t' << format_exact(b.fused) << '\t' << format_exact(b.tau) << '\t';
  for (std::size_t i = 0; i < kLevels; ++i) os << (i ? "," : "") << format_exact(b.rsl_out.probs[i]);
  os << '\t';
  for (std::size_t i = 0; i < kLevels; ++i) os << (i ? "," : "") << format_exact(b.base_out.probs[i]);
  return os.str();
}

std::size_t ModelParams::base_input_width() const {
  return schema.fields.size() * config.field_dim + 2 + (config.base_uses_relevance_embedding ? config.text_dim : 0);
}

std::size_t ModelParams::rsl_input_width() const { return 2 + 3 * config.text_dim; }

ModelParams ModelParams::init(const ModelConfig& config) {
  validate(config);
  ModelParams p;
  p.config = config;
  p.schema = data::FeatureSchema::standard(config.user_buckets, config.item_buckets, config.category_buckets,
                                           config.descriptor_buckets);
  Rng rng(config.seed);
  for (const auto& field : p.schema.fields) {
    p.field_tables.emplace_back("model.field." + field.name,
                                num::uniform_tensor(field.cardinality, config.field_dim, kFieldInitLimit, rng),
                                LrGroup::Base);
  }
  const std::size_t d = config.text_dim;
  const std::size_t base_out = config.base_only ? 1 : kLevels;
  auto base_w = chain(p.base_input_width(), config.base_hidden, base_out);
  auto base_a = hidden_then_linear(config.base_hidden.size());
  p.base = num::Mlp("model.base", base_w, base_a, LrGroup::Base, rng);

  auto rsl_w = chain(p.rsl_input_width(), config.rsl_hidden, kLevels);
  auto rsl_a = hidden_then_linear(config.rsl_hidden.size());
  p.rsl = num::Mlp("model.rsl", rsl_w, rsl_a, LrGroup::RslFinetune, rng);

  p.attention.w_q = ParamTensor("model.attn.wq", num::xavier_uniform(d, d, rng), LrGroup::Prim);
  p.attention.w_k = ParamTensor("model.attn.wk", num::xavier_uniform(d, d, rng), LrGroup::Prim);
  p.attention.w_v = ParamTensor("model.attn.wv", num::xavier_uniform(d, d, rng), LrGroup::Prim);
  p.attention.heads = config.heads;

  auto inc_w = chain(2 * d, config.incentive_hidden, 1);
  auto inc_a = hidden_then_linear(config.incentive_hidden.size());
  p.incentive = num::Mlp("model.incentive", inc_w, inc_a, LrGroup::Prim, rng);
  // Zero output layer: the incentive starts neutral (tau = 1).
  p.incentive.layers().back().weight.value.fill(0.0);

  if (config.wide) {
    p.wide_w = ParamTensor("model.wide.w", Tensor({base_out, 2}, 0.0), LrGroup::Base);
    p.wide_b = ParamTensor("model.wide.b", Tensor({base_out}, 0.0), LrGroup::Base);
  }
  return p;
}

std::vector<ParamTensor*> ModelParams::params() {
  std::vector<ParamTensor*> out;
  for (auto& t : field_tables) out.push_back(&t);
  for (auto* p : base.params()) out.push_back(p);
  if (!config.base_only) {
    for (auto* p : rsl.params()) out.push_back(p);
    out.push_back(&attention.w_q);
    out.push_back(&attention.w_k);
    out.push_back(&attention.w_v);
    for (auto* p : incentive.params()) out.push_back(p);
  }
  if (config.wide) {
    out.push_back(&wide_w);
    out.push_back(&wide_b);
  }
  return out;
}

std::vector<ParamTensor*> ModelParams::params(LrGroup group) {
  std::vector<ParamTensor*> out;
  for (auto* p : params())
    if (p->group == group) out.push_back(p);
  return out;
}

num::Checkpoint ModelParams::to_checkpoint() const {
  num::Checkpoint ckpt;
  auto& m = ckpt.meta;
  m["kind"] = "prectr-model";
  m["field_dim"] = std::to_string(config.field_dim);
  m["user_buckets"] = std::to_string(config.user_buckets);
  m["item_buckets"] = std::to_string(config.item_buckets);
  m["category_buckets"] = std::to_string(config.category_buckets);
  m["descriptor_buckets"] = std::to_string(config.descriptor_buckets);
  m["text_dim"] = std::to_string(config.text_dim);
  m["base_hidden"] = join_sizes(config.base_hidden);
  m["rsl_hidden"] = join_sizes(config.rsl_hidden);
  m["incentive_hidden"] = join_sizes(config.incentive_hidden);
  m["heads"] = std::to_string(config.heads);
  m["base_uses_relevance_embedding"] = config.base_uses_relevance_embedding ? "1" : "0";
  m["wide"] = config.wide ? "1" : "0";
  m["use_prim"] = config.use_prim ? "1" : "0";
  m["base_only"] = config.base_only ? "1" : "0";
  m["seed"] = std::to_string(config.seed);
  for (const auto& t : field_tables) ckpt.params.push_back(t);
  num::append_mlp(ckpt, base);
  num::append_mlp(ckpt, rsl);
  ckpt.params.push_back(attention.w_q);
  ckpt.params.push_back(attention.w_k);
  ckpt.params.push_back(attention.w_v);
  num::append_mlp(ckpt, incentive);
  if (config.wide) {
    ckpt.params.push_back(wide_w);
    ckpt.params.push_back(wide_b);
  }
  return ckpt;
}

ModelParams ModelParams::from_checkpoint(const num::Checkpoint& ckpt) {
  auto kind = ckpt.meta.find("kind");
  require(kind != ckpt.meta.end() && kind->second == "prectr-model", ErrorKind::Dependency,
          "checkpoint is not a model checkpoint");
  auto size_of = [&](const std::string& k) { return static_cast<std::size_t>(parse_int(meta_at(ckpt, k))); };
  auto flag_of = [&](const std::string& k) { return meta_at(ckpt, k) == "1"; };
  ModelConfig c;
  c.field_dim = size_of("field_dim");
  c.user_buckets = size_of("user_buckets");
  c.item_buckets = size_of("item_buckets");
  c.category_buckets = size_of("category_buckets");
  c.descriptor_buckets = size_of("descriptor_buckets");
  c.text_dim = size_of("text_dim");
  c.base_hidden = parse_sizes(meta_at(ckpt, "base_hidden"));
  c.rsl_hidden = parse_sizes(meta_at(ckpt, "rsl_hidden"));
  c.incentive_hidden = parse_sizes(meta_at(ckpt, "incentive_hidden"));
  c.heads = size_of("heads");
  c.base_uses_relevance_embedding = flag_of("base_uses_relevance_embedding");
  c.wide = flag_of("wide");
  c.use_prim = flag_of("use_prim");
  c.base_only = flag_of("base_only");
  c.seed = std::stoull(meta_at(ckpt, "seed"));
  validate(c);

  ModelParams p;
  p.config = c;
  p.schema = data::FeatureSchema::standard(c.user_buckets, c.item_buckets, c.category_buckets, c.descriptor_buckets);
  for (const auto& field : p.schema.fields) {
    p.field_tables.push_back(ckpt.find("model.field." + field.name));
    const auto& v = p.field_tables.back().value;
    require(v.rank() == 2 && v.rows() == field.cardinality && v.cols() == c.field_dim, ErrorKind::Dimension,
            "field table '" + field.name + "' has shape " + v.shape_string());
  }
  p.base = num::mlp_from_checkpoint(ckpt, "model.base", hidden_then_linear(c.base_hidden.size()));
  p.rsl = num::mlp_from_checkpoint(ckpt, "model.rsl", hidden_then_linear(c.rsl_hidden.size()));
  p.attention.w_q = ckpt.find("model.attn.wq");
  p.attention.w_k = ckpt.find("model.attn.wk");
  p.attention.w_v = ckpt.find("model.attn.wv");
  p.attention.heads = c.heads;
  p.incentive = num::mlp_from_checkpoint(ckpt, "model.incentive", hidden_then_linear(c.incentive_hidden.size()));
  if (c.wide) {
    p.wide_w = ckpt.find("model.wide.w");
    p.wide_b = ckpt.find("model.wide.b");
  }

  const std::size_t d = c.text_dim;
  require(p.base.in_width() == p.base_input_width() && p.base.out_width() == (c.base_only ? 1 : kLevels),
          ErrorKind::Dimension, "base network shape does not match the model config");
  require(p.rsl.in_width() == p.rsl_input_width() && p.rsl.out_width() == kLevels, ErrorKind::Dimension,
          "rsl network shape does not match the model config");
  for (const auto* w : {&p.attention.w_q, &p.attention.w_k, &p.attention.w_v}) {
    require(w->value.rank() == 2 && w->value.rows() == d && w->value.cols() == d, ErrorKind::Dimension,
            "attention projection '" + w->name + "' must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  require(p.incentive.in_width() == 2 * d && p.incentive.out_width() == 1, ErrorKind::Dimension,
          "incentive network shape does not match the model config");
  return p;
}

EncodedDataset::EncodedDataset(const std::vector<data::Sample>& samples, const encoder::EmbeddingIndex& index,
                               const data::FeatureSchema& schema) {
  rows_.reserve(samples.size());
  for (const auto& s : samples) {
    require(s.history.size() <= data::kMaxHistory, ErrorKind::Validation,
            "history longer than " + std::to_string(data::kMaxHistory));
    EncodedSample e;
    e.field_ids = schema.extract(s);
    e.category_match = s.category_match;
    e.contains_query = s.contains_query;
    e.query_emb = resolve_text(index, s.query_text);
    e.item_emb = resolve_text(index, s.item_text);
    e.pair_emb = resolve_pair(index, s.query_text, s.item_text);
    for (const auto& h : s.history) {
      e.history_query.push_back(resolve_text(index, h.query));
      e.history_pair.push_back(resolve_pair(index, h.query, h.item_text));
    }
    e.click = s.click;
    e.rsl = s.rsl;
    e.query_key = fnv1a64(s.query_text);
    rows_.push_back(std::move(e));
  }
}

std::span<const double> EncodedDataset::resolve_text(const encoder::EmbeddingIndex& index, const std::string& key) {
  if (const auto* v = index.find_text(key)) return *v;
  owned_.push_back(index.text(key).values);
  return owned_.back();
}

std::span<const double> EncodedDataset::resolve_pair(const encoder::EmbeddingIndex& index, const std::string& q,
                                                     const std::string& i) {
  if (const auto* v = index.find_pair(q, i)) return *v;
  owned_.push_back(index.pair(q, i).values);
  return owned_.back();
}

Batch make_batch(std::span<const EncodedSample* const> rows) {
  require(!rows.empty(), ErrorKind::Validation, "empty batch");
  const std::size_t b = rows.size();
  const std::size_t d = rows[0]->query_emb.size();
  const std::size_t n_fields = rows[0]->field_ids.size();
  Batch out;
  out.size = b;
  out.field_ids.assign(n_fields, {});
  for (auto& f : out.field_ids) f.reserve(b);
  std::vector<double> flags, q, it, r, hq, hr;
  flags.reserve(2 * b);
  q.reserve(b * d);
  it.reserve(b * d);
  r.reserve(b * d);
  out.offsets.reserve(b + 1);
  out.offsets.push_back(0);
  for (const auto* row : rows) {
    require(row->field_ids.size() == n_fields, ErrorKind::Dimension, "inconsistent field counts in batch");
    require(row->query_emb.size() == d && row->item_emb.size() == d && row->pair_emb.size() == d,
            ErrorKind::Dimension, "inconsistent embedding widths in batch");
    for (std::size_t f = 0; f < n_fields; ++f) out.field_ids[f].push_back(row->field_ids[f]);
    flags.push_back(row->category_match);
    flags.push_back(row->contains_query);
    q.insert(q.end(), row->query_emb.begin(), row->query_emb.end());
    it.insert(it.end(), row->item_emb.begin(), row->item_emb.end());
    r.insert(r.end(), row->pair_emb.begin(), row->pair_emb.end());
    for (std::size_t h = 0; h < row->history_query.size(); ++h) {
      require(row->history_query[h].size() == d && row->history_pair[h].size() == d, ErrorKind::Dimension,
              "inconsistent history embedding widths in batch");
      hq.insert(hq.end(), row->history_query[h].begin(), row->history_query[h].end());
      hr.insert(hr.end(), row->history_pair[h].begin(), row->history_pair[h].end());
    }
    out.offsets.push_back(out.offsets.back() + row->history_query.size());
    out.cold.push_back(row->history_query.empty());
    out.clicks.push_back(row->click);
    out.level_index.push_back(static_cast<std::size_t>(row->rsl - 1));
    out.rsl.push_back(row->rsl);
    out.query_key.push_back(row->query_key);
  }
  out.flags = Tensor::matrix(b, 2, std::move(flags));
  out.query_emb = Tensor::matrix(b, d, std::move(q));
  out.item_emb = Tensor::matrix(b, d, std::move(it));
  out.pair_emb = Tensor::matrix(b, d, std::move(r));
  const std::size_t n_hist = out.offsets.back();
  if (n_hist > 0) {
    out.history_query = Tensor::matrix(n_hist, d, std::move(hq));
    out.history_pair = Tensor::matrix(n_hist, d, std::move(hr));
  }
  return out;
}

Forward forward(Tape& tape, ModelParams& params, const Batch& batch) { return forward_impl(tape, params, batch); }

Forward forward(Tape& tape, const ModelParams& params, const Batch& batch) {
  return forward_impl(tape, params, batch);
}

Var rsl_logits(Tape& tape, ModelParams& params, const Batch& batch) {
  require(!params.config.base_only, ErrorKind::Precondition, "base-only models have no rsl module");
  require(batch.query_emb.cols() == params.config.text_dim, ErrorKind::Dimension,
          "embedding width does not match model text_dim");
  Var in = num::concat_cols({tape.constant(batch.flags), tape.constant(batch.query_emb),
                             tape.constant(batch.item_emb), tape.constant(batch.pair_emb)});
  return num::mlp_apply(tape, params.rsl, in);
}

RslOutput rsl_forward(const data::Sample& sample, const encoder::EmbeddingIndex& index, const ModelParams& params) {
  return score_single(sample, index, params).rsl_out;
}

BaseOutput base_forward(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                        const ModelParams& params) {
  return score_single(sample, index, params).base_out;
}

double fuse(std::span<const double> g, std::span<const double> t) {
  require(g.size() == kLevels && t.size() == kLevels, ErrorKind::Dimension,
          "fuse expects two length-4 vectors, got " + std::to_string(g.size()) + " and " + std::to_string(t.size()));
  return num::dot(g, t);
}

double fuse(const BaseOutput& g, const RslOutput& t) { return fuse(g.probs, t.probs); }

std::pair<std::vector<encoder::TextEmbedding>, std::vector<encoder::RelevanceEmbedding>>
extract_history_preferences(const std::vector<data::HistoryEntry>& history, const encoder::EmbeddingIndex& index) {
  require(history.size() <= data::kMaxHistory, ErrorKind::Validation,
          "history longer than " + std::to_string(data::kMaxHistory));
  std::pair<std::vector<encoder::TextEmbedding>, std::vector<encoder::RelevanceEmbedding>> out;
  for (const auto& h : history) {
    out.first.push_back(index.text(h.query));
    out.second.push_back(index.pair(h.query, h.item_text));
  }
  return out;
}

namespace {

struct Projected {
  Tensor q, k, v;
};

Projected project(Tape& tape, const PreferenceContext& ctx, const AttentionParams& attn) {
  const std::size_t d = attn.w_q.value.rows();
  check_context(ctx, d);
  require(!ctx.history_queries.empty(), ErrorKind::Validation, "current_preference needs a non-empty history");
  std::vector<const std::vector<double>*> ks, vs;
  for (const auto& e : ctx.history_queries) ks.push_back(&e.values);
  for (const auto& e : ctx.history_pairs) vs.push_back(&e.values);
  Var q = num::matmul_t(tape.constant(Tensor::matrix(1, d, ctx.query.values)), tape.constant(attn.w_q.value));
  Var k = num::matmul_t(tape.constant(stack_rows(ks, d)), tape.constant(attn.w_k.value));
  Var v = num::matmul_t(tape.constant(stack_rows(vs, d)), tape.constant(attn.w_v.value));
  return {tape.value(q), tape.value(k), tape.value(v)};
}

}  // namespace

std::vector<double> current_preference(const PreferenceContext& ctx, const AttentionParams& attn) {
  Tape tape;
  Projected p = project(tape, ctx, attn);
  const std::size_t offsets[] = {0, p.k.rows()};
  Var out = num::segment_attention(tape.constant(p.q), tape.constant(p.k), tape.constant(p.v), offsets, attn.heads);
  auto row = tape.value(out).row(0);
  return {row.begin(), row.end()};
}

std::vector<std::vector<double>> attention_weights(const PreferenceContext& ctx, const AttentionParams& attn) {
  Tape tape;
  Projected p = project(tape, ctx, attn);
  const std::size_t offsets[] = {0, p.k.rows()};
  return num::segment_attention_weights(p.q, p.k, offsets, attn.heads);
}

double incentive(std::span<const double> r_cur, std::span<const double> r_expect, const num::Mlp& net) {
  require(r_cur.size() == r_expect.size(), ErrorKind::Dimension, "incentive inputs differ in width");
  require(net.in_width() == 2 * r_cur.size(), ErrorKind::Dimension,
          "incentive network expects input width " + std::to_string(net.in_width()));
  std::vector<double> x(r_cur.begin(), r_cur.end());
  x.insert(x.end(), r_expect.begin(), r_expect.end());
  const std::size_t width = x.size();
  Tape tape;
  Var z = num::mlp_apply(tape, net, tape.constant(Tensor::matrix(1, width, std::move(x))));
  return tape.value(num::scale(num::sigmoid(z), 2.0)).at(0, 0);
}

double personalized_incentive(const PreferenceContext& ctx, const ModelParams& params) {
  check_context(ctx, params.config.text_dim);
  if (ctx.history_queries.empty()) return 1.0;
  return incentive(ctx.current_pair.values, current_preference(ctx, params.attention), params.incentive);
}

ScoreBreakdown personalized_score(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                                  const ModelParams& params) {
  return score_single(sample, index, params);
}

std::vector<ScoreBreakdown> score_dataset(const EncodedDataset& data, const ModelParams& params,
                                          std::size_t batch_size, std::size_t threads) {
  require(batch_size > 0, ErrorKind::Validation, "batch_size must be positive");
  std::vector<ScoreBreakdown> out(data.size());
  const std::size_t n_batches = (data.size() + batch_size - 1) / batch_size;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n_batches, 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (std::size_t bi; (bi = next.fetch_add(1)) < n_batches;) {
        const std::size_t lo = bi * batch_size, hi = std::min(data.size(), lo + batch_size);
        std::vector<const EncodedSample*> rows;
        for (std::size_t i = lo; i < hi; ++i) rows.push_back(&data[i]);
        Batch batch = make_batch(rows);
        Tape tape;
        Forward f = forward(tape, params, batch);
        for (std::size_t i = lo; i < hi; ++i) out[i] = breakdown_row(tape, f, i - lo);
      }
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace prectr::model
