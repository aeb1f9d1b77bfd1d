#include "data/features.hpp"

#include "common/error.hpp"
#include "common/text.hpp"

namespace prectr::data {

namespace {

std::size_t bucket(std::string_view token, std::size_t n) { return fnv1a64(token) % n; }

void split_text(const std::string& text, std::string& category, std::vector<std::string>& descriptors) {
  auto toks = split_whitespace(to_lower(text));
  category = toks.empty() ? std::string() : toks.front();
  descriptors.assign(toks.empty() ? toks.end() : toks.begin() + 1, toks.end());
}

}  // namespace

FeatureSchema FeatureSchema::standard(std::size_t user_buckets, std::size_t item_buckets,
                                      std::size_t category_buckets, std::size_t descriptor_buckets) {
  require(user_buckets && item_buckets && category_buckets && descriptor_buckets, ErrorKind::Validation,
          "feature cardinalities must be positive");
  FeatureSchema s;
  s.fields = {{"user", user_buckets, false},
              {"item", item_buckets, false},
              {"item_category", category_buckets, false},
              {"query_category", category_buckets, false},
              {"item_descriptors", descriptor_buckets, true},
              {"query_descriptors", descriptor_buckets, true}};
  return s;
}

std::vector<std::vector<std::size_t>> FeatureSchema::extract(const Sample& s) const {
  require(fields.size() == 6, ErrorKind::Validation, "feature schema must have the standard six fields");
  std::string icat, qcat;
  std::vector<std::string> idesc, qdesc;
  split_text(s.item_text, icat, idesc);
  split_text(s.query_text, qcat, qdesc);
  std::vector<std::vector<std::size_t>> out(6);
  out[0] = {static_cast<std::size_t>(s.user_id % fields[0].cardinality)};
  out[1] = {static_cast<std::size_t>(s.item_id % fields[1].cardinality)};
  if (!icat.empty()) out[2] = {bucket(icat, fields[2].cardinality)};
  if (!qcat.empty()) out[3] = {bucket(qcat, fields[3].cardinality)};
  for (const auto& d : idesc) out[4].push_back(bucket(d, fields[4].cardinality));
  for (const auto& d : qdesc) out[5].push_back(bucket(d, fields[5].cardinality));
  return out;
}

}  // namespace prectr::data
