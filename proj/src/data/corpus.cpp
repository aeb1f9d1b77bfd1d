#include "data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"
#include "numerics/functions.hpp"

namespace prectr::data {

namespace {

const char* const kHeader =
    "user_id\tquery_text\titem_id\titem_text\tcategory_match\tcontains_query\trsl\tclick\thistory";

std::vector<std::string> lowered_tokens(std::string_view text) { return split_whitespace(to_lower(text)); }

struct Item {
  std::size_t category;
  std::string text;
  double quality;
};

// Draws k distinct descriptors; earlier pool entries are more popular
// (weight 1 / (rank + 1)), which keeps descriptor overlap common.
std::vector<std::string> sample_descriptors(const std::vector<std::string>& pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> remaining(pool.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
  k = std::min(k, remaining.size());
  std::vector<std::string> out;
  for (std::size_t n = 0; n < k; ++n) {
    double total = 0.0;
    for (auto r : remaining) total += 1.0 / static_cast<double>(r + 1);
    double u = rng.uniform() * total;
    std::size_t pick = remaining.size() - 1;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      u -= 1.0 / static_cast<double>(remaining[i] + 1);
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    out.push_back(pool[remaining[pick]]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::string make_text(std::size_t category, const std::vector<std::string>& descriptors) {
  std::string t = "cat" + std::to_string(category);
  for (const auto& d : descriptors) t += " " + d;
  return t;
}

void check_field(std::string_view text, const char* what) {
  require(text.find_first_of("\t;^\n\r") == std::string_view::npos, ErrorKind::Validation,
          std::string(what) + " may not contain tab, semicolon, caret or newline: '" + std::string(text) + "'");
}

}  // namespace

void validate(const GeneratorConfig& c) {
  require(c.n_users > 0 && c.n_items > 0 && c.n_queries > 0 && c.n_impressions > 0, ErrorKind::Validation,
          "generator counts must be positive");
  require(c.n_categories >= 1 && c.descriptors_per_pool >= 1, ErrorKind::Validation,
          "need at least one category and one descriptor");
  require(c.item_descriptors_min >= 1 && c.item_descriptors_min <= c.item_descriptors_max, ErrorKind::Validation,
          "item descriptor range is invalid");
  require(c.same_category_prob >= 0.0 && c.sibling_category_prob >= 0.0 &&
              c.same_category_prob + c.sibling_category_prob <= 1.0,
          ErrorKind::Validation, "candidate mixing probabilities must be in [0, 1]");
  const auto& t = c.rsl_thresholds;
  require(t[0] > 0.0 && t[0] < t[1] && t[1] < t[2] && t[2] < 1.0, ErrorKind::Validation,
          "rsl thresholds must be strictly increasing inside (0, 1)");
  require(c.sensitivity_alpha >= 1 && c.sensitivity_beta >= 1, ErrorKind::Validation,
          "sensitivity Beta shapes must be integers >= 1");
  require(c.max_history <= kMaxHistory, ErrorKind::Validation, "max_history cannot exceed 50");
}

double ground_truth_relevance(std::string_view query_text, std::string_view item_text) {
  const auto q = lowered_tokens(query_text);
  const auto i = lowered_tokens(item_text);
  if (q.empty() || i.empty()) return 0.0;
  const bool cat = q.front() == i.front();
  const std::set<std::string> qd(q.begin() + 1, q.end());
  const std::set<std::string> id(i.begin() + 1, i.end());
  double jaccard = 0.0;
  if (qd.empty() && id.empty()) {
    // No descriptors on either side: the texts agree exactly when the categories do.
    jaccard = cat ? 1.0 : 0.0;
  } else {
    std::size_t inter = 0;
    for (const auto& t : qd) inter += id.count(t);
    jaccard = static_cast<double>(inter) / static_cast<double>(qd.size() + id.size() - inter);
  }
  return 0.5 * (cat ? 1.0 : 0.0) + 0.5 * jaccard;
}

int assign_rsl(double relevance, const std::array<double, 3>& thresholds) {
  require(relevance >= 0.0 && relevance <= 1.0, ErrorKind::Validation, "relevance must lie in [0, 1]");
  if (relevance < thresholds[0]) return 1;
  if (relevance < thresholds[1]) return 2;
  if (relevance < thresholds[2]) return 3;
  return 4;
}

int category_match(std::string_view query_text, std::string_view item_text) {
  const auto q = lowered_tokens(query_text);
  const auto i = lowered_tokens(item_text);
  return (!q.empty() && !i.empty() && q.front() == i.front()) ? 1 : 0;
}

int contains_query(std::string_view query_text, std::string_view item_text) {
  const auto q = lowered_tokens(query_text);
  const auto i = lowered_tokens(item_text);
  if (q.empty()) return 0;
  const std::set<std::string> items(i.begin(), i.end());
  for (const auto& t : q) {
    if (!items.count(t)) return 0;
  }
  return 1;
}

double click_probability(double s, double q, double r, const GeneratorConfig& c) {
  return num::sigmoid(c.w_quality * (q - 0.5) + c.w_relevance * s * (r - 0.5) + c.bias);
}

ClickDraw simulate_click(double s, double q, double r, const GeneratorConfig& c, Rng& rng) {
  require(s >= 0.0 && s <= 1.0 && q >= 0.0 && q <= 1.0 && r >= 0.0 && r <= 1.0, ErrorKind::Validation,
          "simulate_click inputs must lie in [0, 1]");
  const double p = click_probability(s, q, r, c);
  return ClickDraw{rng.bernoulli(p) ? 1 : 0, p};
}

Corpus generate_corpus(const GeneratorConfig& c) {
  validate(c);
  Rng rng(c.seed);

  const std::size_t families = (c.n_categories + 1) / 2;
  std::vector<std::vector<std::string>> pools(families);
  for (std::size_t f = 0; f < families; ++f) {
    for (std::size_t j = 0; j < c.descriptors_per_pool; ++j) {
      pools[f].push_back("d" + std::to_string(f) + "x" + std::to_string(j));
    }
  }

  std::vector<Item> items;
  std::vector<std::vector<std::size_t>> by_category(c.n_categories);
  for (std::size_t i = 0; i < c.n_items; ++i) {
    const std::size_t cat = rng.below(c.n_categories);
    const auto k = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(c.item_descriptors_min),
                                                        static_cast<std::int64_t>(c.item_descriptors_max)));
    auto desc = sample_descriptors(pools[cat / 2], k, rng);
    items.push_back(Item{cat, make_text(cat, desc), rng.uniform()});
    by_category[cat].push_back(i);
  }

  std::vector<std::pair<std::size_t, std::string>> queries;
  for (std::size_t i = 0; i < c.n_queries; ++i) {
    const std::size_t cat = rng.below(c.n_categories);
    const auto k = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(c.query_descriptors_max)));
    queries.emplace_back(cat, make_text(cat, sample_descriptors(pools[cat / 2], k, rng)));
  }

  std::vector<double> sensitivity(c.n_users);
  for (auto& s : sensitivity) s = rng.beta_int(c.sensitivity_alpha, c.sensitivity_beta);

  std::vector<std::deque<HistoryEntry>> history(c.n_users);
  Corpus corpus;
  corpus.samples.reserve(c.n_impressions);
  corpus.truth.reserve(c.n_impressions);
  for (std::size_t n = 0; n < c.n_impressions; ++n) {
    const std::size_t user = rng.below(c.n_users);
    const auto& [qcat, qtext] = queries[rng.below(c.n_queries)];
    const double mode = rng.uniform();
    std::size_t item = 0;
    const std::size_t sibling = (qcat ^ 1U) < c.n_categories ? (qcat ^ 1U) : qcat;
    if (mode < c.same_category_prob && !by_category[qcat].empty()) {
      item = by_category[qcat][rng.below(by_category[qcat].size())];
    } else if (mode < c.same_category_prob + c.sibling_category_prob && !by_category[sibling].empty()) {
      item = by_category[sibling][rng.below(by_category[sibling].size())];
    } else {
      item = rng.below(c.n_items);
    }
    const Item& it = items[item];
    const double relevance = ground_truth_relevance(qtext, it.text);
    const auto draw = simulate_click(sensitivity[user], it.quality, relevance, c, rng);

    Sample s;
    s.user_id = user;
    s.query_text = qtext;
    s.item_id = item;
    s.item_text = it.text;
    s.category_match = category_match(qtext, it.text);
    s.contains_query = contains_query(qtext, it.text);
    s.rsl = assign_rsl(relevance, c.rsl_thresholds);
    s.click = draw.click;
    s.history.assign(history[user].begin(), history[user].end());
    corpus.samples.push_back(std::move(s));
    corpus.truth.push_back(GroundTruth{relevance, it.quality, sensitivity[user], draw.probability});

    if (draw.click) {
      auto& h = history[user];
      h.push_front(HistoryEntry{qtext, it.text});
      if (h.size() > c.max_history) h.pop_back();
    }
  }
  return corpus;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.train = n * 78 / 100;
  s.valid = n * 11 / 100;
  s.test = n - s.train - s.valid;
  return s;
}

std::string serialize_dataset(const std::vector<Sample>& samples) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& s : samples) {
    check_field(s.query_text, "query text");
    check_field(s.item_text, "item text");
    require(s.history.size() <= kMaxHistory, ErrorKind::Validation, "history longer than 50 entries");
    out += std::to_string(s.user_id) + '\t' + s.query_text + '\t' + std::to_string(s.item_id) + '\t' +
           s.item_text + '\t' + std::to_string(s.category_match) + '\t' + std::to_string(s.contains_query) +
           '\t' + std::to_string(s.rsl) + '\t' + std::to_string(s.click) + '\t';
    for (std::size_t i = 0; i < s.history.size(); ++i) {
      const auto& h = s.history[i];
      check_field(h.query, "history query");
      check_field(h.item_text, "history item");
      if (i) out += ';';
      out += h.query + '^' + h.item_text;
    }
    out += '\n';
  }
  return out;
}

std::vector<Sample> parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) fail(ErrorKind::Parse, "dataset: missing header (line 1)");
  std::vector<Sample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = " (line " + std::to_string(line_no) + ")";
    const auto cols = split(line, '\t');
    if (cols.size() != 9) fail(ErrorKind::Parse, "dataset: expected 9 columns" + where);
    Sample s;
    try {
      s.user_id = static_cast<std::uint64_t>(parse_int(cols[0]));
      s.query_text = std::string(cols[1]);
      s.item_id = static_cast<std::uint64_t>(parse_int(cols[2]));
      s.item_text = std::string(cols[3]);
      s.category_match = static_cast<int>(parse_int(cols[4]));
      s.contains_query = static_cast<int>(parse_int(cols[5]));
      s.rsl = static_cast<int>(parse_int(cols[6]));
      s.click = static_cast<int>(parse_int(cols[7]));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, std::string("dataset: ") + e.what() + where);
    }
    if ((s.category_match | s.contains_query | s.click) & ~1) {
      fail(ErrorKind::Parse, "dataset: flag columns must be 0 or 1" + where);
    }
    if (s.rsl < 1 || s.rsl > 4) fail(ErrorKind::Parse, "dataset: rsl outside 1..4" + where);
    if (s.query_text.find_first_of(";^") != std::string::npos ||
        s.item_text.find_first_of(";^") != std::string::npos) {
      fail(ErrorKind::Parse, "dataset: text contains a reserved character" + where);
    }
    if (!cols[8].empty()) {
      for (auto entry : split(cols[8], ';')) {
        const auto parts = split(entry, '^');
        if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
          fail(ErrorKind::Parse, "dataset: malformed history entry" + where);
        }
        s.history.push_back(HistoryEntry{std::string(parts[0]), std::string(parts[1])});
      }
    }
    if (s.history.size() > kMaxHistory) fail(ErrorKind::Parse, "dataset: history longer than 50" + where);
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  const auto text = serialize_dataset(samples);
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open dataset " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

void write_truth(const std::vector<GroundTruth>& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "row\trelevance\tquality\tsensitivity\ttrue_click_prob\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& t = truth[i];
    out << i << '\t' << format_exact(t.relevance) << '\t' << format_exact(t.quality) << '\t'
        << format_exact(t.sensitivity) << '\t' << format_exact(t.true_click_prob) << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

std::vector<GroundTruth> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Dependency, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<GroundTruth> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 5 || static_cast<std::size_t>(parse_int(cols[0])) != out.size()) {
      fail(ErrorKind::Parse, "truth sidecar: bad record (line " + std::to_string(line_no) + ")");
    }
    out.push_back(GroundTruth{parse_double(cols[1]), parse_double(cols[2]), parse_double(cols[3]),
                              parse_double(cols[4])});
  }
  return out;
}

}  // namespace prectr::data
