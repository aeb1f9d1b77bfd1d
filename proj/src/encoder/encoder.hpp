#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "common/rng.hpp"
#include "numerics/checkpoint.hpp"
#include "numerics/mlp.hpp"

namespace prectr::encoder {

struct TokenId {
  std::uint32_t value = 0;
  auto operator<=>(const TokenId&) const = default;
};

// Unit-norm embedding of a single text.
struct TextEmbedding {
  std::vector<double> values;
};

// Unit-norm embedding of a "[CLS] query [SEP] item [SEP]" sequence.
struct RelevanceEmbedding {
  std::vector<double> values;
};

struct EncoderConfig {
  std::size_t vocab_size = 4096;
  std::size_t raw_dim = 64;
  std::size_t dim = 32;
  double learning_rate = 0.05;
  std::size_t pretrain_epochs = 5;
  std::size_t finetune_epochs = 5;
  std::size_t batch_size = 64;
  double finetune_lr_factor = 0.1;
  std::uint64_t seed = 7;
};

// Lowercase, split on whitespace, hash each token into [0, vocab_size).
std::vector<TokenId> tokenize(std::string_view text, std::size_t vocab_size);

// Hashed token table followed by a 3-layer reduction MLP. The table has
// vocab_size + 3 rows: reserved CLS, SEP and an empty-text sentinel sit
// after the hash range.
class EncoderParams {
 public:
  EncoderParams() = default;
  EncoderParams(const EncoderConfig& config, Rng& rng);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t raw_dim() const { return token_table_.value.cols(); }
  std::size_t dim() const { return reduction_.out_width(); }
  TokenId cls() const { return TokenId{static_cast<std::uint32_t>(vocab_size_)}; }
  TokenId sep() const { return TokenId{static_cast<std::uint32_t>(vocab_size_ + 1)}; }
  TokenId empty_sentinel() const { return TokenId{static_cast<std::uint32_t>(vocab_size_ + 2)}; }

  std::vector<TokenId> pair_tokens(std::string_view query, std::string_view item) const;

  // Forward pass without a tape; used for index builds and lookups.
  std::vector<double> encode_tokens(const std::vector<TokenId>& tokens) const;

  // Batched forward on a tape; returns B x dim unit-norm rows.
  num::Var encode_batch(num::Tape& tape, const std::vector<std::vector<TokenId>>& rows);

  num::ParamTensor& token_table() { return token_table_; }
  num::Mlp& reduction() { return reduction_; }
  num::Mlp& relevance_head() { return relevance_head_; }
  num::Mlp& level_head() { return level_head_; }
  const num::Mlp& relevance_head() const { return relevance_head_; }
  const num::Mlp& level_head() const { return level_head_; }

  // Table + reduction MLP; the classification heads are training-only.
  std::vector<num::ParamTensor*> encoder_params();
  std::vector<num::ParamTensor*> all_params();

  num::Checkpoint to_checkpoint() const;
  static EncoderParams from_checkpoint(const num::Checkpoint& ckpt);

  // Digest of the table and reduction MLP.
  std::string checkpoint_id() const;

 private:
  std::size_t vocab_size_ = 0;
  num::ParamTensor token_table_;
  num::Mlp reduction_;
  num::Mlp relevance_head_;
  num::Mlp level_head_;
};

TextEmbedding encode_text(std::string_view text, const EncoderParams& params);
RelevanceEmbedding encode_pair(std::string_view query, std::string_view item,
                               const EncoderParams& params);

struct ClickPair {
  std::string query;
  std::string item;
  bool clicked = false;
};

struct LabeledPair {
  std::string query;
  std::string item;
  int level = 1;  // 1..4
};

struct TrainTrace {
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
};

// Binary relevance pretraining on implicit feedback.
TrainTrace pretrain_encoder(const std::vector<ClickPair>& pairs, const EncoderConfig& config,
                            EncoderParams& params);

// 4-level fine-tuning at learning_rate * finetune_lr_factor.
TrainTrace finetune_encoder(EncoderParams& params, const std::vector<LabeledPair>& pairs,
                            const EncoderConfig& config);

// Mean 4-level cross-entropy over the pairs, without updating anything.
double level_loss(EncoderParams& params, const std::vector<LabeledPair>& pairs);
int predict_level(const EncoderParams& params, std::string_view query, std::string_view item);
bool predict_relevant(const EncoderParams& params, std::string_view query, std::string_view item);

}  // namespace prectr::encoder
