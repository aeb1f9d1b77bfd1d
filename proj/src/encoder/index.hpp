#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "encoder/encoder.hpp"

namespace prectr::encoder {

// Precomputed text and pair embeddings.
//
// File layout (UTF-8, one record per line):
//   dim=<d> checkpoint=<id>
//   text\t<key>\t<v1>,...,<vd>
//   pair\t<query>\x01<item>\t<v1>,...,<vd>
// Records are sorted by kind then key so rebuilding is byte-identical.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  EmbeddingIndex(std::size_t dim, std::string checkpoint_id);

  std::size_t dim() const { return dim_; }
  const std::string& checkpoint_id() const { return checkpoint_id_; }
  // Set at build time; not part of the file.
  const std::string& built_at() const { return built_at_; }
  void set_built_at(std::string when) { built_at_ = std::move(when); }

  void put_text(std::string key, std::vector<double> v);
  void put_pair(std::string query, std::string item, std::vector<double> v);

  std::size_t size() const { return texts_.size() + pairs_.size(); }
  std::size_t text_count() const { return texts_.size(); }
  std::size_t pair_count() const { return pairs_.size(); }

  // Encoder used when a key is missing; must outlive the index.
  void set_fallback(const EncoderParams* params) { fallback_ = params; }
  bool has_fallback() const { return fallback_ != nullptr; }

  TextEmbedding text(std::string_view key) const;
  RelevanceEmbedding pair(std::string_view query, std::string_view item) const;
  // Direct access without fallback; nullptr when absent.
  const std::vector<double>* find_text(std::string_view key) const;
  const std::vector<double>* find_pair(std::string_view query, std::string_view item) const;

  std::size_t cache_misses() const { return misses_->load(); }

  std::string serialize() const;
  static EmbeddingIndex parse(const std::string& text);
  void write(const std::filesystem::path& path) const;
  static EmbeddingIndex read(const std::filesystem::path& path);

  static std::string pair_key(std::string_view query, std::string_view item);

 private:
  std::size_t dim_ = 0;
  std::string checkpoint_id_;
  std::string built_at_;
  std::map<std::string, std::vector<double>, std::less<>> texts_;
  std::map<std::string, std::vector<double>, std::less<>> pairs_;
  const EncoderParams* fallback_ = nullptr;
  std::shared_ptr<std::atomic<std::size_t>> misses_ = std::make_shared<std::atomic<std::size_t>>(0);
};

// Encodes every distinct text and every distinct (query, item) pair.
EmbeddingIndex build_index(const std::vector<std::string>& texts,
                           const std::vector<std::pair<std::string, std::string>>& pairs,
                           const EncoderParams& params);

}  // namespace prectr::encoder
