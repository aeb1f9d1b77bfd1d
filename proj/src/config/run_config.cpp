#include "config/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace prectr::config {

namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::uint64_t parse_u64(std::string_view s, const std::string& key) {
  s = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    fail(ErrorKind::Parse, key + ": not a non-negative integer: '" + std::string(s) + "'");
  return v;
}

bool parse_bool(std::string_view s, const std::string& key) {
  const auto v = to_lower(trim(s));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::Parse, key + ": not a boolean: '" + std::string(s) + "'");
}

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::vector<std::size_t> parse_sizes(std::string_view s, const std::string& key) {
  std::vector<std::size_t> out;
  if (trim(s) == "none") return out;
  for (auto part : split(s, ',')) out.push_back(parse_u64(part, key));
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <class T>
Field unsigned_field(std::string key, T RunConfig::*section, std::size_t T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = parse_u64(v, key); },
          [=](const RunConfig& c) { return std::to_string((c.*section).*member); }};
}

template <class T>
Field seed_field(std::string key, T RunConfig::*section, std::uint64_t T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = parse_u64(v, key); },
          [=](const RunConfig& c) { return std::to_string((c.*section).*member); }};
}

template <class T>
Field int_field(std::string key, T RunConfig::*section, int T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = static_cast<int>(parse_int(v)); },
          [=](const RunConfig& c) { return std::to_string((c.*section).*member); }};
}

template <class T>
Field real_field(std::string key, T RunConfig::*section, double T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = parse_double(v); },
          [=](const RunConfig& c) { return shortest((c.*section).*member); }};
}

template <class T>
Field bool_field(std::string key, T RunConfig::*section, bool T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = parse_bool(v, key); },
          [=](const RunConfig& c) { return std::string((c.*section).*member ? "true" : "false"); }};
}

template <class T>
Field sizes_field(std::string key, T RunConfig::*section, std::vector<std::size_t> T::*member) {
  return {key,
          [=](RunConfig& c, const std::string& v) { (c.*section).*member = parse_sizes(v, key); },
          [=](const RunConfig& c) { return join_sizes((c.*section).*member); }};
}

const std::vector<Field>& fields() {
  using data::GeneratorConfig;
  using encoder::EncoderConfig;
  using model::ModelConfig;
  using training::TrainConfig;
  constexpr auto D = &RunConfig::data;
  constexpr auto E = &RunConfig::encoder;
  constexpr auto M = &RunConfig::model;
  constexpr auto T = &RunConfig::train;
  static const std::vector<Field> table = {
      seed_field("data.seed", D, &GeneratorConfig::seed),
      unsigned_field("data.n_users", D, &GeneratorConfig::n_users),
      unsigned_field("data.n_items", D, &GeneratorConfig::n_items),
      unsigned_field("data.n_queries", D, &GeneratorConfig::n_queries),
      unsigned_field("data.n_impressions", D, &GeneratorConfig::n_impressions),
      unsigned_field("data.n_categories", D, &GeneratorConfig::n_categories),
      unsigned_field("data.descriptors_per_pool", D, &GeneratorConfig::descriptors_per_pool),
      unsigned_field("data.item_descriptors_min", D, &GeneratorConfig::item_descriptors_min),
      unsigned_field("data.item_descriptors_max", D, &GeneratorConfig::item_descriptors_max),
      unsigned_field("data.query_descriptors_max", D, &GeneratorConfig::query_descriptors_max),
      real_field("data.same_category_prob", D, &GeneratorConfig::same_category_prob),
      real_field("data.sibling_category_prob", D, &GeneratorConfig::sibling_category_prob),
      real_field("data.w_quality", D, &GeneratorConfig::w_quality),
      real_field("data.w_relevance", D, &GeneratorConfig::w_relevance),
      real_field("data.bias", D, &GeneratorConfig::bias),
      {"data.rsl_thresholds",
       [](RunConfig& c, const std::string& v) {
         auto parts = split(v, ',');
         require(parts.size() == 3, ErrorKind::Parse, "data.rsl_thresholds: expected three comma-separated numbers");
         for (std::size_t i = 0; i < 3; ++i) c.data.rsl_thresholds[i] = parse_double(parts[i]);
       },
       [](const RunConfig& c) {
         const auto& t = c.data.rsl_thresholds;
         return shortest(t[0]) + "," + shortest(t[1]) + "," + shortest(t[2]);
       }},
      int_field("data.sensitivity_alpha", D, &GeneratorConfig::sensitivity_alpha),
      int_field("data.sensitivity_beta", D, &GeneratorConfig::sensitivity_beta),
      unsigned_field("data.max_history", D, &GeneratorConfig::max_history),

      seed_field("encoder.seed", E, &EncoderConfig::seed),
      unsigned_field("encoder.vocab_size", E, &EncoderConfig::vocab_size),
      unsigned_field("encoder.raw_dim", E, &EncoderConfig::raw_dim),
      unsigned_field("encoder.dim", E, &EncoderConfig::dim),
      real_field("encoder.learning_rate", E, &EncoderConfig::learning_rate),
      real_field("encoder.finetune_lr_factor", E, &EncoderConfig::finetune_lr_factor),
      unsigned_field("encoder.pretrain_epochs", E, &EncoderConfig::pretrain_epochs),
      unsigned_field("encoder.finetune_epochs", E, &EncoderConfig::finetune_epochs),
      unsigned_field("encoder.batch_size", E, &EncoderConfig::batch_size),

      seed_field("model.seed", M, &ModelConfig::seed),
      unsigned_field("model.field_dim", M, &ModelConfig::field_dim),
      unsigned_field("model.user_buckets", M, &ModelConfig::user_buckets),
      unsigned_field("model.item_buckets", M, &ModelConfig::item_buckets),
      unsigned_field("model.category_buckets", M, &ModelConfig::category_buckets),
      unsigned_field("model.descriptor_buckets", M, &ModelConfig::descriptor_buckets),
      sizes_field("model.base_hidden", M, &ModelConfig::base_hidden),
      sizes_field("model.rsl_hidden", M, &ModelConfig::rsl_hidden),
      sizes_field("model.incentive_hidden", M, &ModelConfig::incentive_hidden),
      unsigned_field("model.heads", M, &ModelConfig::heads),
      bool_field("model.base_uses_relevance_embedding", M, &ModelConfig::base_uses_relevance_embedding),
      bool_field("model.wide", M, &ModelConfig::wide),

      seed_field("train.seed", T, &TrainConfig::seed),
      unsigned_field("train.batch_size", T, &TrainConfig::batch_size),
      real_field("train.lr_stage1", T, &TrainConfig::lr_stage1),
      real_field("train.lr_base", T, &TrainConfig::lr_base),
      real_field("train.lr_rsl_finetune", T, &TrainConfig::lr_rsl_finetune),
      real_field("train.lr_prim", T, &TrainConfig::lr_prim),
      real_field("train.momentum", T, &TrainConfig::momentum),
      real_field("train.alpha", T, &TrainConfig::alpha),
      real_field("train.beta", T, &TrainConfig::beta),
      real_field("train.gamma", T, &TrainConfig::gamma),
      unsigned_field("train.stage1_epochs", T, &TrainConfig::stage1_epochs),
      unsigned_field("train.stage2_epochs", T, &TrainConfig::stage2_epochs),
      {"train.grouping",
       [](RunConfig& c, const std::string& v) { c.train.grouping = training::grouping_from_string(std::string(trim(v))); },
       [](const RunConfig& c) { return std::string(training::to_string(c.train.grouping)); }},
      bool_field("train.no_two_stage", T, &TrainConfig::no_two_stage),
      bool_field("train.no_regularizer", T, &TrainConfig::no_regularizer),
      bool_field("train.no_prim", T, &TrainConfig::no_prim),
      bool_field("train.base_only", T, &TrainConfig::base_only),
  };
  return table;
}

const Field& find(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  fail(ErrorKind::Validation, "unknown configuration key '" + key + "'");
}

}  // namespace

std::vector<std::string> keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

void set(RunConfig& config, const std::string& key, const std::string& value) {
  find(key).set(config, value);
}

std::string get(const RunConfig& config, const std::string& key) { return find(key).get(config); }

void apply_text(RunConfig& config, const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string_view::npos, ErrorKind::Parse,
            "config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      set(config, key, value);
    } catch (const Error& e) {
      fail(e.kind(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_text(config, buf.str());
}

std::string resolved(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

void validate(const RunConfig& config) {
  data::validate(config.data);
  const auto& e = config.encoder;
  require(e.vocab_size > 0 && e.raw_dim > 0 && e.dim > 0 && e.batch_size > 0, ErrorKind::Validation,
          "encoder sizes must be positive");
  require(e.learning_rate > 0.0 && e.finetune_lr_factor > 0.0, ErrorKind::Validation,
          "encoder learning rates must be positive");
  model::validate(effective_model(config));
  training::validate(config.train);
}

model::ModelConfig effective_model(const RunConfig& config) {
  auto m = config.model;
  m.text_dim = config.encoder.dim;
  return training::apply_variant(m, config.train);
}

}  // namespace prectr::config
