#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "data/corpus.hpp"
#include "encoder/index.hpp"
#include "model/model.hpp"

namespace prectr::testing {

inline std::vector<double> random_unit(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  double norm = 0.0;
  for (auto& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

// Random unit embeddings for every text and pair the samples reference.
inline encoder::EmbeddingIndex random_index(const std::vector<data::Sample>& samples, std::size_t d,
                                            std::uint64_t seed) {
  encoder::EmbeddingIndex index(d, "random");
  Rng rng(seed);
  auto text = [&](const std::string& t) {
    if (!index.find_text(t)) index.put_text(t, random_unit(d, rng));
  };
  auto pair = [&](const std::string& q, const std::string& i) {
    if (!index.find_pair(q, i)) index.put_pair(q, i, random_unit(d, rng));
  };
  for (const auto& s : samples) {
    text(s.query_text);
    text(s.item_text);
    pair(s.query_text, s.item_text);
    for (const auto& h : s.history) {
      text(h.query);
      text(h.item_text);
      pair(h.query, h.item_text);
    }
  }
  return index;
}

inline data::GeneratorConfig small_corpus_config(std::size_t impressions, std::uint64_t seed = 11) {
  data::GeneratorConfig c;
  c.seed = seed;
  c.n_users = 20;
  c.n_items = 60;
  c.n_queries = 30;
  c.n_impressions = impressions;
  return c;
}

inline model::ModelConfig small_model_config(std::size_t d, std::uint64_t seed = 3) {
  model::ModelConfig c;
  c.field_dim = 3;
  c.user_buckets = 16;
  c.item_buckets = 32;
  c.category_buckets = 8;
  c.descriptor_buckets = 16;
  c.text_dim = d;
  c.base_hidden = {6};
  c.rsl_hidden = {5};
  c.incentive_hidden = {4};
  c.seed = seed;
  return c;
}

// Overwrites every parameter with uniform draws in [-limit, limit].
inline void randomize(model::ModelParams& params, double limit, Rng& rng) {
  for (auto* p : params.params())
    for (auto& v : p->value.values()) v = rng.uniform(-limit, limit);
}

inline void zero_all(model::ModelParams& params) {
  for (auto* p : params.params()) p->value.fill(0.0);
}

}  // namespace prectr::testing
