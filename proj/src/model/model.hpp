#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "data/corpus.hpp"
#include "data/features.hpp"
#include "encoder/index.hpp"
#include "numerics/checkpoint.hpp"
#include "numerics/mlp.hpp"

namespace prectr::model {

inline constexpr std::size_t kLevels = 4;
// Final scores are clamped to [kScoreFloor, 1 - kScoreFloor].
inline constexpr double kScoreFloor = 1e-7;

struct ModelConfig {
  std::size_t field_dim = 8;
  std::size_t user_buckets = 2048;
  std::size_t item_buckets = 4096;
  std::size_t category_buckets = 64;
  std::size_t descriptor_buckets = 512;
  std::size_t text_dim = 32;
  std::vector<std::size_t> base_hidden{64, 32};
  std::vector<std::size_t> rsl_hidden{32};
  std::vector<std::size_t> incentive_hidden{16};
  std::size_t heads = 1;
  bool base_uses_relevance_embedding = true;
  bool wide = false;
  bool use_prim = true;
  // Single sigmoid head on the Base network; no RSL module, no fusion, no PRIM.
  bool base_only = false;
  std::uint64_t seed = 1;
};

void validate(const ModelConfig& config);

struct RslOutput {
  std::array<double, kLevels> probs{};
};

struct BaseOutput {
  std::array<double, kLevels> probs{};
};

struct ScoreBreakdown {
  RslOutput rsl_out;
  BaseOutput base_out;
  double fused = 0.0;
  double tau = 1.0;
  double final_score = 0.0;
};

// final \t fused \t tau \t T1,T2,T3,T4 \t g1,g2,g3,g4
std::string serialize(const ScoreBreakdown& b);

struct AttentionParams {
  num::ParamTensor w_q, w_k, w_v;  // d x d
  std::size_t heads = 1;
};

// Current query and click-history embeddings feeding the incentive module.
struct PreferenceContext {
  encoder::TextEmbedding query;
  std::vector<encoder::TextEmbedding> history_queries;
  std::vector<encoder::RelevanceEmbedding> history_pairs;
  encoder::RelevanceEmbedding current_pair;
};

// Learning-rate groups: field tables, Base network and wide term -> base;
// RSL network -> rsl-finetune; attention and incentive network -> prim.
struct ModelParams {
  ModelConfig config;
  data::FeatureSchema schema;
  std::vector<num::ParamTensor> field_tables;
  num::Mlp base;
  num::Mlp rsl;
  AttentionParams attention;
  num::Mlp incentive;
  num::ParamTensor wide_w, wide_b;

  static ModelParams init(const ModelConfig& config);

  std::size_t base_input_width() const;
  std::size_t rsl_input_width() const;

  std::vector<num::ParamTensor*> params();
  std::vector<num::ParamTensor*> params(num::LrGroup group);

  num::Checkpoint to_checkpoint() const;
  static ModelParams from_checkpoint(const num::Checkpoint& ckpt);
};

// A sample with its sparse ids and embedding views resolved once.
struct EncodedSample {
  std::vector<std::vector<std::size_t>> field_ids;
  double category_match = 0.0;
  double contains_query = 0.0;
  std::span<const double> query_emb, item_emb, pair_emb;
  std::vector<std::span<const double>> history_query, history_pair;
  double click = 0.0;
  int rsl = 1;
  std::uint64_t query_key = 0;  // hash of the query text
};

// Embeddings come from the index, or from its encoder fallback (owned here).
class EncodedDataset {
 public:
  EncodedDataset(const std::vector<data::Sample>& samples, const encoder::EmbeddingIndex& index,
                 const data::FeatureSchema& schema);
  EncodedDataset(const EncodedDataset&) = delete;
  EncodedDataset& operator=(const EncodedDataset&) = delete;
  EncodedDataset(EncodedDataset&&) = default;

  std::size_t size() const { return rows_.size(); }
  const EncodedSample& operator[](std::size_t i) const { return rows_[i]; }

 private:
  std::span<const double> resolve_text(const encoder::EmbeddingIndex& index, const std::string& key);
  std::span<const double> resolve_pair(const encoder::EmbeddingIndex& index, const std::string& q,
                                       const std::string& i);

  std::vector<EncodedSample> rows_;
  std::deque<std::vector<double>> owned_;
};

// Dense constants for one minibatch.
struct Batch {
  std::size_t size = 0;
  std::vector<std::vector<std::vector<std::size_t>>> field_ids;  // [field][row]
  num::Tensor flags;                                             // B x 2
  num::Tensor query_emb, item_emb, pair_emb;                     // B x d
  num::Tensor history_query, history_pair;                       // N x d (empty if N == 0)
  std::vector<std::size_t> offsets;                              // B + 1
  std::vector<bool> cold;                                        // no history
  std::vector<double> clicks;
  std::vector<std::size_t> level_index;  // rsl - 1
  std::vector<double> rsl;               // 1..4
  std::vector<std::uint64_t> query_key;
};

Batch make_batch(std::span<const EncodedSample* const> rows);

// Tape nodes of one forward pass. For base-only models rsl_* are unset.
struct Forward {
  num::Var rsl_logits, rsl_probs;  // B x 4
  num::Var base_probs;             // B x 4 (B x 1 when base-only)
  num::Var fused;                  // B x 1
  num::Var tau;                    // B x 1
  num::Var final_score;            // B x 1
  bool has_rsl = false;
};

// Trainable forward: every parameter is bound for gradients.
Forward forward(num::Tape& tape, ModelParams& params, const Batch& batch);
// Frozen forward: parameters are recorded as constants.
Forward forward(num::Tape& tape, const ModelParams& params, const Batch& batch);
// RSL logits only, for relevance-level pretraining.
num::Var rsl_logits(num::Tape& tape, ModelParams& params, const Batch& batch);

RslOutput rsl_forward(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                      const ModelParams& params);
BaseOutput base_forward(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                        const ModelParams& params);

// Sum_i g_i * T_i.
double fuse(std::span<const double> g, std::span<const double> t);
double fuse(const BaseOutput& g, const RslOutput& t);

std::pair<std::vector<encoder::TextEmbedding>, std::vector<encoder::RelevanceEmbedding>>
extract_history_preferences(const std::vector<data::HistoryEntry>& history,
                            const encoder::EmbeddingIndex& index);

// Target attention of the current query over the history; rejects empty history.
std::vector<double> current_preference(const PreferenceContext& ctx, const AttentionParams& attn);
// One weight vector per head.
std::vector<std::vector<double>> attention_weights(const PreferenceContext& ctx, const AttentionParams& attn);

// 2 * sigmoid(M(concat(r_cur, r_expect))).
double incentive(std::span<const double> r_cur, std::span<const double> r_expect, const num::Mlp& net);
// As above, but 1 exactly when the history is empty.
double personalized_incentive(const PreferenceContext& ctx, const ModelParams& params);

ScoreBreakdown personalized_score(const data::Sample& sample, const encoder::EmbeddingIndex& index,
                                  const ModelParams& params);

// Scores every row with frozen parameters; batches may run on several threads.
std::vector<ScoreBreakdown> score_dataset(const EncodedDataset& data, const ModelParams& params,
                                          std::size_t batch_size = 1024, std::size_t threads = 0);

}  // namespace prectr::model
