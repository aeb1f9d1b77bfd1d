#pragma once

#include <string>
#include <vector>

#include "data/corpus.hpp"

namespace prectr::data {

struct FieldSpec {
  std::string name;
  std::size_t cardinality = 1;
  bool multi_hot = false;
};

// Model-visible sparse fields derived from a Sample. Ids are hashed or
// reduced modulo each field's cardinality, so every id < cardinality.
struct FeatureSchema {
  std::vector<FieldSpec> fields;

  static FeatureSchema standard(std::size_t user_buckets, std::size_t item_buckets,
                                std::size_t category_buckets, std::size_t descriptor_buckets);

  // One id list per field, in schema order.
  std::vector<std::vector<std::size_t>> extract(const Sample& s) const;
};

}  // namespace prectr::data
