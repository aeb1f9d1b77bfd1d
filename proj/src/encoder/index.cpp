#include "encoder/index.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace prectr::encoder {

namespace {

constexpr char kPairSep = '\x01';

std::string join_values(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_exact(v[i]);
  }
  return out;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::size_t dim, std::string checkpoint_id)
    : dim_(dim), checkpoint_id_(std::move(checkpoint_id)) {}

std::string EmbeddingIndex::pair_key(std::string_view query, std::string_view item) {
  std::string key(query);
  key += kPairSep;
  key += item;
  return key;
}

void EmbeddingIndex::put_text(std::string key, std::vector<double> v) {
  require(v.size() == dim_, ErrorKind::Dimension, "index vector has the wrong dimension");
  texts_[std::move(key)] = std::move(v);
}

void EmbeddingIndex::put_pair(std::string query, std::string item, std::vector<double> v) {
  require(v.size() == dim_, ErrorKind::Dimension, "index vector has the wrong dimension");
  pairs_[pair_key(query, item)] = std::move(v);
}

const std::vector<double>* EmbeddingIndex::find_text(std::string_view key) const {
  auto it = texts_.find(key);
  return it == texts_.end() ? nullptr : &it->second;
}

const std::vector<double>* EmbeddingIndex::find_pair(std::string_view query, std::string_view item) const {
  auto it = pairs_.find(pair_key(query, item));
  return it == pairs_.end() ? nullptr : &it->second;
}

TextEmbedding EmbeddingIndex::text(std::string_view key) const {
  if (const auto* v = find_text(key)) return TextEmbedding{*v};
  require(fallback_ != nullptr, ErrorKind::Lookup,
          "text '" + std::string(key) + "' is not indexed and no encoder is available");
  misses_->fetch_add(1);
  return encode_text(key, *fallback_);
}

RelevanceEmbedding EmbeddingIndex::pair(std::string_view query, std::string_view item) const {
  if (const auto* v = find_pair(query, item)) return RelevanceEmbedding{*v};
  require(fallback_ != nullptr, ErrorKind::Lookup,
          "pair '" + std::string(query) + "' / '" + std::string(item) +
              "' is not indexed and no encoder is available");
  misses_->fetch_add(1);
  return encode_pair(query, item, *fallback_);
}

std::string EmbeddingIndex::serialize() const {
  std::string out = "dim=" + std::to_string(dim_) + " checkpoint=" + checkpoint_id_ + "\n";
  for (const auto& [k, v] : texts_) out += "text\t" + k + "\t" + join_values(v) + "\n";
  for (const auto& [k, v] : pairs_) out += "pair\t" + k + "\t" + join_values(v) + "\n";
  return out;
}

EmbeddingIndex EmbeddingIndex::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "index: empty file");
  const auto head = split_whitespace(line);
  if (head.size() != 2 || head[0].rfind("dim=", 0) != 0 || head[1].rfind("checkpoint=", 0) != 0) {
    fail(ErrorKind::Parse, "index: bad header line");
  }
  EmbeddingIndex index(static_cast<std::size_t>(parse_int(head[0].substr(4))), head[1].substr(11));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    const std::string where = " (line " + std::to_string(line_no) + ")";
    if (cols.size() != 3) fail(ErrorKind::Parse, "index: expected 3 tab-separated columns" + where);
    std::vector<double> v;
    try {
      for (auto tok : split(cols[2], ',')) v.push_back(parse_double(tok));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, std::string("index: ") + e.what() + where);
    }
    if (v.size() != index.dim_) fail(ErrorKind::Parse, "index: vector has the wrong dimension" + where);
    if (cols[0] == "text") {
      index.texts_[std::string(cols[1])] = std::move(v);
    } else if (cols[0] == "pair") {
      if (cols[1].find(kPairSep) == std::string_view::npos) {
        fail(ErrorKind::Parse, "index: pair key without separator" + where);
      }
      index.pairs_[std::string(cols[1])] = std::move(v);
    } else {
      fail(ErrorKind::Parse, "index: unknown record kind '" + std::string(cols[0]) + "'" + where);
    }
  }
  return index;
}

void EmbeddingIndex::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << serialize();
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

EmbeddingIndex EmbeddingIndex::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open index " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

EmbeddingIndex build_index(const std::vector<std::string>& texts,
                           const std::vector<std::pair<std::string, std::string>>& pairs,
                           const EncoderParams& params) {
  EmbeddingIndex index(params.dim(), params.checkpoint_id());
  for (const auto& t : texts) {
    if (index.find_text(t) == nullptr) index.put_text(t, encode_text(t, params).values);
  }
  for (const auto& [q, i] : pairs) {
    if (index.find_pair(q, i) == nullptr) index.put_pair(q, i, encode_pair(q, i, params).values);
  }
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  index.set_built_at(std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now).count()));
  return index;
}

}  // namespace prectr::encoder
