#include <cmath>
#include <numeric>

#include "common/error.hpp"
#include "doctest.h"
#include "model/model.hpp"
#include "numerics/gradcheck.hpp"
#include "support/fixtures.hpp"

using namespace prectr;
using namespace prectr::model;
using num::Tensor;

namespace {

data::Sample plain_sample(int cm, int cq) {
  data::Sample s;
  s.user_id = 3;
  s.item_id = 5;
  s.query_text = "cat1 d0x1";
  s.item_text = "cat1 d0x1 d0x2";
  s.category_match = cm;
  s.contains_query = cq;
  return s;
}

data::Sample with_history(data::Sample s, std::size_t m) {
  for (std::size_t i = 0; i < m; ++i) {
    s.history.push_back({"cat" + std::to_string(i) + " d1x0", "cat" + std::to_string(i) + " d1x0 d1x3"});
  }
  return s;
}

AttentionParams identity_attention(std::size_t d) {
  AttentionParams a;
  Tensor eye({d, d}, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye.at(i, i) = 1.0;
  a.w_q = num::ParamTensor("q", eye, num::LrGroup::Prim);
  a.w_k = num::ParamTensor("k", eye, num::LrGroup::Prim);
  a.w_v = num::ParamTensor("v", eye, num::LrGroup::Prim);
  return a;
}

AttentionParams random_attention(std::size_t d, Rng& rng) {
  AttentionParams a;
  a.w_q = num::ParamTensor("q", num::uniform_tensor(d, d, 1.0, rng), num::LrGroup::Prim);
  a.w_k = num::ParamTensor("k", num::uniform_tensor(d, d, 1.0, rng), num::LrGroup::Prim);
  a.w_v = num::ParamTensor("v", num::uniform_tensor(d, d, 1.0, rng), num::LrGroup::Prim);
  return a;
}

PreferenceContext random_context(std::size_t d, std::size_t m, Rng& rng) {
  PreferenceContext ctx;
  ctx.query.values = testing::random_unit(d, rng);
  ctx.current_pair.values = testing::random_unit(d, rng);
  for (std::size_t i = 0; i < m; ++i) {
    ctx.history_queries.push_back({testing::random_unit(d, rng)});
    ctx.history_pairs.push_back({testing::random_unit(d, rng)});
  }
  return ctx;
}

std::vector<double> project(const Tensor& w, const std::vector<double>& x) {
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) out[r] += w.at(r, c) * x[c];
  return out;
}

}  // namespace

TEST_CASE("zero weights give uniform levels, half click heads and a neutral incentive") {
  auto cfg = testing::small_model_config(4);
  auto params = ModelParams::init(cfg);
  testing::zero_all(params);
  auto s = with_history(plain_sample(1, 0), 3);
  auto index = testing::random_index({s}, 4, 1);
  auto b = personalized_score(s, index, params);
  for (std::size_t i = 0; i < kLevels; ++i) {
    CHECK(b.rsl_out.probs[i] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(b.base_out.probs[i] == 0.5);
  }
  CHECK(b.tau == 1.0);
  CHECK(b.fused == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.final_score == b.fused);
}

TEST_CASE("fresh initialization starts with tau exactly one") {
  auto params = ModelParams::init(testing::small_model_config(4));
  auto s = with_history(plain_sample(0, 1), 5);
  auto index = testing::random_index({s}, 4, 2);
  auto b = personalized_score(s, index, params);
  CHECK(b.tau == 1.0);
  CHECK(b.final_score == b.fused);
}

TEST_CASE("hand-traced single-layer rsl network on the two flags") {
  auto cfg = testing::small_model_config(2);
  cfg.rsl_hidden = {};
  auto params = ModelParams::init(cfg);
  auto& layer = params.rsl.layers().at(0);
  REQUIRE(layer.weight.value.cols() == 8);
  layer.weight.value.fill(0.0);
  // Columns 0 and 1 are category_match and contains_query.
  layer.weight.value.at(0, 0) = 1.0;
  layer.weight.value.at(1, 1) = 1.0;
  layer.weight.value.at(2, 0) = 1.0;
  layer.weight.value.at(2, 1) = 1.0;
  layer.bias.value = Tensor::vector({0, 0, 0, 0.5});
  auto s = plain_sample(1, 0);
  auto index = testing::random_index({s}, 2, 3);
  auto t = rsl_forward(s, index, params);
  const double z = 2 * std::exp(1.0) + 1.0 + std::exp(0.5);
  CHECK(t.probs[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(t.probs[1] == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(t.probs[2] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(t.probs[3] == doctest::Approx(std::exp(0.5) / z).epsilon(1e-14));
}

TEST_CASE("hand-traced base network with per-head sigmoids") {
  auto cfg = testing::small_model_config(2);
  cfg.base_hidden = {};
  auto params = ModelParams::init(cfg);
  auto& layer = params.base.layers().at(0);
  const std::size_t flag_col = params.schema.fields.size() * cfg.field_dim;
  layer.weight.value.fill(0.0);
  for (std::size_t i = 0; i < kLevels; ++i) layer.weight.value.at(i, flag_col) = 0.5 * static_cast<double>(i);
  layer.bias.value = Tensor::vector({-0.5, -0.5, -0.5, -0.5});
  auto s = plain_sample(1, 1);
  auto index = testing::random_index({s}, 2, 4);
  auto g = base_forward(s, index, params);
  const double logits[] = {-0.5, 0.0, 0.5, 1.0};
  double sum = 0.0;
  for (std::size_t i = 0; i < kLevels; ++i) {
    CHECK(g.probs[i] == doctest::Approx(1.0 / (1.0 + std::exp(-logits[i]))).epsilon(1e-14));
    sum += g.probs[i];
  }
  CHECK(sum > 1.0);  // not a simplex
}

TEST_CASE("fuse examples and length check") {
  CHECK(fuse(BaseOutput{{0.1, 0.2, 0.3, 0.4}}, RslOutput{{0, 0, 1, 0}}) == doctest::Approx(0.3));
  CHECK(fuse(BaseOutput{{0.7, 0.7, 0.7, 0.7}}, RslOutput{{0.1, 0.2, 0.3, 0.4}}) == doctest::Approx(0.7));
  CHECK(fuse(BaseOutput{{0, 0, 0, 1}}, RslOutput{{0.25, 0.25, 0.25, 0.25}}) == doctest::Approx(0.25));
  std::vector<double> three{0.1, 0.2, 0.3}, four{0.25, 0.25, 0.25, 0.25};
  try {
    fuse(three, four);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
}

TEST_CASE("raising a click head with positive level mass raises the fused score") {
  RslOutput t{{0.1, 0.2, 0.3, 0.4}};
  BaseOutput g{{0.2, 0.4, 0.6, 0.8}};
  const double before = fuse(g, t);
  for (std::size_t i = 0; i < kLevels; ++i) {
    BaseOutput h = g;
    h.probs[i] += 0.05;
    CHECK(fuse(h, t) > before);
  }
}

TEST_CASE("attention over one history entry returns the projected value") {
  Rng rng(5);
  auto attn = random_attention(4, rng);
  auto ctx = random_context(4, 1, rng);
  auto out = current_preference(ctx, attn);
  auto expect = project(attn.w_v.value, ctx.history_pairs[0].values);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-14));
  CHECK(attention_weights(ctx, attn) == std::vector<std::vector<double>>{{1.0}});
}

TEST_CASE("identical keys average the projected values") {
  Rng rng(6);
  auto attn = random_attention(4, rng);
  auto ctx = random_context(4, 3, rng);
  for (auto& k : ctx.history_queries) k = ctx.history_queries[0];
  auto out = current_preference(ctx, attn);
  std::vector<double> mean(4, 0.0);
  for (const auto& r : ctx.history_pairs) {
    auto p = project(attn.w_v.value, r.values);
    for (std::size_t i = 0; i < 4; ++i) mean[i] += p[i] / 3.0;
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(mean[i]).epsilon(1e-12));
}

TEST_CASE("hand-traced two-entry attention with identity projections") {
  auto attn = identity_attention(4);
  PreferenceContext ctx;
  ctx.query.values = {2, 0, 0, 0};
  ctx.current_pair.values = {0, 0, 0, 1};
  ctx.history_queries = {{{1, 0, 0, 0}}, {{0, 1, 0, 0}}};
  ctx.history_pairs = {{{1, 0, 0, 0}}, {{0, 0, 1, 0}}};
  // Scores q.k / sqrt(4) = [1, 0].
  const double w1 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  auto w = attention_weights(ctx, attn).at(0);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(w1).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(1.0 - w1).epsilon(1e-14));
  auto out = current_preference(ctx, attn);
  CHECK(out[0] == doctest::Approx(w1).epsilon(1e-14));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == doctest::Approx(1.0 - w1).epsilon(1e-14));
  CHECK(out[3] == 0.0);
}

TEST_CASE("attention is invariant to history order and rejects empty history") {
  Rng rng(7);
  for (std::size_t heads : {1u, 2u}) {
    auto attn = random_attention(4, rng);
    attn.heads = heads;
    auto ctx = random_context(4, 6, rng);
    auto base = current_preference(ctx, attn);
    auto shuffled = ctx;
    std::vector<std::size_t> order(6);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < 6; ++i) {
      shuffled.history_queries[i] = ctx.history_queries[order[i]];
      shuffled.history_pairs[i] = ctx.history_pairs[order[i]];
    }
    auto perm = current_preference(shuffled, attn);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(base[i] - perm[i]) <= 1e-12);
    auto w = attention_weights(ctx, attn);
    CHECK(w.size() == heads);
    for (const auto& head : w) {
      double sum = 0.0;
      for (double x : head) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
  auto empty = random_context(4, 0, rng);
  try {
    current_preference(empty, identity_attention(4));
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
  }
}

TEST_CASE("incentive range, neutral point and cold start") {
  Rng rng(8);
  auto params = ModelParams::init(testing::small_model_config(4));
  std::vector<double> a = testing::random_unit(4, rng), b = testing::random_unit(4, rng);
  CHECK(incentive(a, b, params.incentive) == 1.0);
  testing::randomize(params, 3.0, rng);
  for (int trial = 0; trial < 200; ++trial) {
    auto ctx = random_context(4, static_cast<std::size_t>(rng.between(0, 5)), rng);
    const double tau = personalized_incentive(ctx, params);
    if (ctx.history_queries.empty()) {
      CHECK(tau == 1.0);
    } else {
      CHECK(tau > 0.0);
      CHECK(tau < 2.0);
    }
  }
  std::vector<double> short_vec{1.0, 0.0};
  CHECK_THROWS_AS(incentive(a, short_vec, params.incentive), Error);
}

TEST_CASE("final score is clamped when tau times fused exceeds one") {
  auto cfg = testing::small_model_config(4);
  auto params = ModelParams::init(cfg);
  auto& out_layer = params.base.layers().back();
  out_layer.weight.value.fill(0.0);
  out_layer.bias.value.fill(std::log(1.5));  // sigmoid = 0.6
  auto& inc = params.incentive.layers().back();
  inc.weight.value.fill(0.0);
  inc.bias.value.fill(40.0);  // 2 * sigmoid(40) rounds to 2
  auto s = with_history(plain_sample(1, 1), 2);
  auto index = testing::random_index({s}, 4, 9);
  auto b = personalized_score(s, index, params);
  CHECK(b.fused == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(b.tau == 2.0);
  CHECK(b.final_score == 1.0 - kScoreFloor);

  auto cold = plain_sample(1, 1);
  auto cold_b = personalized_score(cold, index, params);
  CHECK(cold_b.tau == 1.0);
  CHECK(cold_b.final_score == cold_b.fused);
}

TEST_CASE("random parameters keep every output in its valid range") {
  Rng rng(10);
  auto corpus = data::generate_corpus(testing::small_corpus_config(60));
  auto index = testing::random_index(corpus.samples, 4, 12);
  for (int draw = 0; draw < 20; ++draw) {
    auto cfg = testing::small_model_config(4, static_cast<std::uint64_t>(draw));
    cfg.heads = draw % 2 ? 2 : 1;
    auto params = ModelParams::init(cfg);
    testing::randomize(params, 1.0, rng);
    EncodedDataset ds(corpus.samples, index, params.schema);
    auto scores = score_dataset(ds, params, 16, 1);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto& b = scores[i];
      double sum = 0.0;
      for (std::size_t k = 0; k < kLevels; ++k) {
        CHECK(b.rsl_out.probs[k] > 0.0);
        CHECK(b.base_out.probs[k] > 0.0);
        CHECK(b.base_out.probs[k] < 1.0);
        sum += b.rsl_out.probs[k];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      CHECK(b.fused > 0.0);
      CHECK(b.fused < 1.0);
      CHECK(b.tau > 0.0);
      CHECK(b.tau < 2.0);
      if (corpus.samples[i].history.empty()) CHECK(b.tau == 1.0);
      CHECK(b.final_score >= kScoreFloor);
      CHECK(b.final_score <= 1.0 - kScoreFloor);
    }
  }
}

TEST_CASE("full composition passes the finite difference check") {
  Rng rng(13);
  auto corpus = data::generate_corpus(testing::small_corpus_config(40));
  std::vector<data::Sample> picked;
  for (const auto& s : corpus.samples) {
    const bool want_history = picked.size() < 3;
    if (want_history == !s.history.empty()) picked.push_back(s);
    if (picked.size() == 4) break;
  }
  REQUIRE(picked.size() == 4);
  auto index = testing::random_index(picked, 4, 14);
  auto params = ModelParams::init(testing::small_model_config(4));
  testing::randomize(params, 0.5, rng);
  EncodedDataset ds(picked, index, params.schema);
  std::vector<const EncodedSample*> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back(&ds[i]);
  Batch batch = make_batch(rows);
  num::LossBuilder loss = [&](num::Tape& t) {
    Forward f = forward(t, params, batch);
    return num::binary_cross_entropy(f.final_score, batch.clicks);
  };
  auto ptrs = params.params();
  auto r = num::finite_difference_check(loss, ptrs);
  INFO("worst " << r.worst_param << "[" << r.worst_index << "]");
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("batched scoring matches single-sample scoring and is thread independent") {
  Rng rng(15);
  auto corpus = data::generate_corpus(testing::small_corpus_config(50));
  auto index = testing::random_index(corpus.samples, 4, 16);
  auto params = ModelParams::init(testing::small_model_config(4));
  testing::randomize(params, 1.0, rng);
  EncodedDataset ds(corpus.samples, index, params.schema);
  auto one = score_dataset(ds, params, 7, 1);
  auto many = score_dataset(ds, params, 7, 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(serialize(one[i]) == serialize(many[i]));
    CHECK(serialize(one[i]) == serialize(personalized_score(corpus.samples[i], index, params)));
  }
}

TEST_CASE("breakdown invariants and line format") {
  Rng rng(17);
  auto corpus = data::generate_corpus(testing::small_corpus_config(20));
  auto index = testing::random_index(corpus.samples, 4, 18);
  auto params = ModelParams::init(testing::small_model_config(4));
  testing::randomize(params, 1.0, rng);
  for (const auto& s : corpus.samples) {
    auto b = personalized_score(s, index, params);
    CHECK(std::abs(b.fused - fuse(b.base_out, b.rsl_out)) <= 1e-12);
    CHECK(b.final_score == std::clamp(b.tau * b.fused, kScoreFloor, 1.0 - kScoreFloor));
  }
  ScoreBreakdown b;
  b.rsl_out.probs = {0.25, 0.25, 0.25, 0.25};
  b.base_out.probs = {0.5, 0.5, 0.5, 0.5};
  b.fused = 0.5;
  b.tau = 1.0;
  b.final_score = 0.5;
  CHECK(serialize(b) == "0.5\t0.5\t1\t0.25,0.25,0.25,0.25\t0.5,0.5,0.5,0.5");
}

TEST_CASE("base-only model reports a shared head and neutral fusion") {
  auto cfg = testing::small_model_config(4);
  cfg.base_only = true;
  auto params = ModelParams::init(cfg);
  CHECK(params.base.out_width() == 1);
  CHECK(params.params(num::LrGroup::RslFinetune).empty());
  CHECK(params.params(num::LrGroup::Prim).empty());
  auto s = with_history(plain_sample(1, 0), 2);
  auto index = testing::random_index({s}, 4, 19);
  auto b = personalized_score(s, index, params);
  CHECK(b.tau == 1.0);
  for (std::size_t i = 0; i < kLevels; ++i) {
    CHECK(b.base_out.probs[i] == b.fused);
    CHECK(b.rsl_out.probs[i] == 0.25);
  }
}

TEST_CASE("parameter groups partition the model") {
  auto cfg = testing::small_model_config(4);
  cfg.wide = true;
  auto params = ModelParams::init(cfg);
  std::size_t total = 0;
  for (auto g : {num::LrGroup::Base, num::LrGroup::RslFinetune, num::LrGroup::Prim}) total += params.params(g).size();
  CHECK(total == params.params().size());
  CHECK(params.params(num::LrGroup::Stage1).empty());
  for (auto* p : params.params(num::LrGroup::RslFinetune)) CHECK(p->name.rfind("model.rsl", 0) == 0);
}

TEST_CASE("model checkpoint round trip preserves scores") {
  Rng rng(20);
  auto corpus = data::generate_corpus(testing::small_corpus_config(20));
  auto index = testing::random_index(corpus.samples, 4, 21);
  auto cfg = testing::small_model_config(4);
  cfg.wide = true;
  cfg.heads = 2;
  auto params = ModelParams::init(cfg);
  testing::randomize(params, 1.0, rng);
  const auto text = num::serialize_checkpoint(params.to_checkpoint());
  auto back = ModelParams::from_checkpoint(num::parse_checkpoint(text));
  CHECK(num::serialize_checkpoint(back.to_checkpoint()) == text);
  for (const auto& s : corpus.samples)
    CHECK(serialize(personalized_score(s, index, params)) == serialize(personalized_score(s, index, back)));

  auto ckpt = params.to_checkpoint();
  ckpt.meta["text_dim"] = "6";
  CHECK_THROWS_AS(ModelParams::from_checkpoint(ckpt), Error);
  ckpt.meta["kind"] = "encoder";
  CHECK_THROWS_AS(ModelParams::from_checkpoint(ckpt), Error);
}

TEST_CASE("history extraction uses the index and missing texts need a fallback") {
  auto s = with_history(plain_sample(1, 0), 1);
  auto index = testing::random_index({s}, 4, 22);
  auto empty = extract_history_preferences({}, index);
  CHECK(empty.first.empty());
  CHECK(empty.second.empty());
  auto one = extract_history_preferences(s.history, index);
  REQUIRE(one.first.size() == 1);
  CHECK(one.first[0].values == *index.find_text(s.history[0].query));
  CHECK(one.second[0].values == *index.find_pair(s.history[0].query, s.history[0].item_text));
  CHECK(index.cache_misses() == 0);

  auto params = ModelParams::init(testing::small_model_config(4));
  auto unknown = plain_sample(0, 0);
  unknown.query_text = "never seen";
  try {
    personalized_score(unknown, index, params);
    FAIL("expected lookup error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Lookup);
  }
  auto wrong_width = testing::random_index({s}, 6, 23);
  CHECK_THROWS_AS(personalized_score(s, wrong_width, params), Error);
}

TEST_CASE("model config validation") {
  auto cfg = testing::small_model_config(4);
  cfg.heads = 3;
  CHECK_THROWS_AS(ModelParams::init(cfg), Error);
  cfg = testing::small_model_config(4);
  cfg.base_hidden = {0};
  CHECK_THROWS_AS(ModelParams::init(cfg), Error);
}
