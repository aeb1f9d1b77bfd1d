#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "data/corpus.hpp"
#include "encoder/index.hpp"
#include "model/model.hpp"

namespace prectr::eval {

struct ScoredImpression {
  std::uint64_t user_id = 0;
  std::string query_text;
  std::string item_text;
  double score = 0.0;
  int click = 0;
};

struct UserAuc {
  std::uint64_t user_id = 0;
  std::size_t impressions = 0;
  double auc = 0.0;
};

struct MetricReport {
  double auc = 0.0;
  double gauc = 0.0;
  double relevance_score = 0.0;
  std::size_t n_impressions = 0;
  std::vector<UserAuc> per_user;  // eligible users only, by user id
};

// Probability that a random positive outranks a random negative; ties count
// one half. Rank-based, O(n log n).
double auc(std::span<const double> scores, std::span<const int> clicks);
double auc(std::span<const ScoredImpression> impressions);

// Impression-weighted mean of per-user AUC over users with both classes.
double gauc(std::span<const ScoredImpression> impressions, std::vector<UserAuc>* per_user = nullptr);

// ((measured - 0.5) / (base - 0.5) - 1) * 100.
double rela_impr(double measured, double base);

// Mean query/item cosine over each query's top-10 distinct items by score.
double relevance_score(std::span<const ScoredImpression> impressions, const encoder::EmbeddingIndex& index,
                       std::size_t top_k = 10);

MetricReport evaluate(std::span<const ScoredImpression> impressions, const encoder::EmbeddingIndex& index);

std::vector<ScoredImpression> score_impressions(const std::vector<data::Sample>& samples,
                                                const model::EncodedDataset& encoded,
                                                const model::ModelParams& params);

struct ComparisonRow {
  std::string name;
  MetricReport report;
  double rela_impr_auc = 0.0;   // against the first row
  double rela_impr_gauc = 0.0;  // against the first row
};

struct Variant {
  std::string name;
  const model::ModelParams* params = nullptr;
};

std::vector<ComparisonRow> run_comparison(const std::vector<Variant>& variants,
                                          const std::vector<data::Sample>& test,
                                          const encoder::EmbeddingIndex& index);

// Tab-separated table with a header row.
std::string format_table(const std::vector<ComparisonRow>& rows);
// One "<variant>.<metric>\t<value>" line per metric.
std::string format_metrics(const std::vector<ComparisonRow>& rows);

}  // namespace prectr::eval
