#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "common/rng.hpp"

namespace prectr::data {

inline constexpr std::size_t kMaxHistory = 50;

struct HistoryEntry {
  std::string query;
  std::string item_text;
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

// One impression as the model sees it.
struct Sample {
  std::uint64_t user_id = 0;
  std::string query_text;
  std::uint64_t item_id = 0;
  std::string item_text;
  int category_match = 0;
  int contains_query = 0;
  int rsl = 1;
  int click = 0;
  std::vector<HistoryEntry> history;  // most recent first
  friend bool operator==(const Sample&, const Sample&) = default;
};

// Generator-only quantities, kept out of the model-visible records.
struct GroundTruth {
  double relevance = 0.0;
  double quality = 0.0;
  double sensitivity = 0.0;
  double true_click_prob = 0.0;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct GeneratorConfig {
  std::uint64_t seed = 20240611;
  std::size_t n_users = 1000;
  std::size_t n_items = 2000;
  std::size_t n_queries = 600;
  std::size_t n_impressions = 100000;
  // Categories come in sibling pairs sharing one descriptor pool.
  std::size_t n_categories = 20;
  std::size_t descriptors_per_pool = 8;
  std::size_t item_descriptors_min = 3;
  std::size_t item_descriptors_max = 8;
  std::size_t query_descriptors_max = 3;
  double same_category_prob = 0.45;
  double sibling_category_prob = 0.25;
  double w_quality = 3.0;
  double w_relevance = 3.0;
  double bias = -1.0;
  std::array<double, 3> rsl_thresholds{0.25, 0.5, 0.75};
  int sensitivity_alpha = 2;
  int sensitivity_beta = 2;
  std::size_t max_history = kMaxHistory;
};

void validate(const GeneratorConfig& config);

struct Corpus {
  std::vector<Sample> samples;
  std::vector<GroundTruth> truth;  // parallel to samples
};

// 0.5 for a matching category token (the first token) plus 0.5 times the
// Jaccard overlap of the remaining descriptor tokens. Empty text scores 0.
double ground_truth_relevance(std::string_view query_text, std::string_view item_text);

// Lower-inclusive buckets: < t0 -> 1, < t1 -> 2, < t2 -> 3, else 4.
int assign_rsl(double relevance, const std::array<double, 3>& thresholds = {0.25, 0.5, 0.75});

int category_match(std::string_view query_text, std::string_view item_text);
int contains_query(std::string_view query_text, std::string_view item_text);

struct ClickDraw {
  int click = 0;
  double probability = 0.0;
};

double click_probability(double sensitivity, double quality, double relevance,
                         const GeneratorConfig& config);
ClickDraw simulate_click(double sensitivity, double quality, double relevance,
                         const GeneratorConfig& config, Rng& rng);

Corpus generate_corpus(const GeneratorConfig& config);

// Sequential 78/11/11 split sizes.
struct SplitSizes {
  std::size_t train = 0, valid = 0, test = 0;
};
SplitSizes split_sizes(std::size_t n);

// Tab-separated dataset file with a header row.
std::string serialize_dataset(const std::vector<Sample>& samples);
std::vector<Sample> parse_dataset(const std::string& text);
void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

// Sidecar keyed by row number.
void write_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path);
std::vector<GroundTruth> read_truth(const std::filesystem::path& path);

}  // namespace prectr::data
