#include "evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "common/error.hpp"
#include "common/text.hpp"

namespace prectr::eval {

double auc(std::span<const double> scores, std::span<const int> clicks) {
  require(scores.size() == clicks.size(), ErrorKind::Dimension, "auc: scores and clicks differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) require(std::isfinite(s), ErrorKind::Validation, "auc: non-finite score");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney statistic, kept integral so the result is exact.
  std::uint64_t twice_wins = 0, negatives_below = 0, positives = 0, negatives = 0;
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    std::uint64_t p = 0, n = 0;
    while (hi < order.size() && scores[order[hi]] == scores[order[lo]]) {
      (clicks[order[hi]] ? p : n) += 1;
      ++hi;
    }
    twice_wins += 2 * p * negatives_below + p * n;
    negatives_below += n;
    positives += p;
    negatives += n;
    lo = hi;
  }
  require(positives > 0 && negatives > 0, ErrorKind::UndefinedMetric, "auc needs both clicked and unclicked impressions");
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double auc(std::span<const ScoredImpression> impressions) {
  std::vector<double> s;
  std::vector<int> c;
  s.reserve(impressions.size());
  c.reserve(impressions.size());
  for (const auto& i : impressions) {
    s.push_back(i.score);
    c.push_back(i.click);
  }
  return auc(s, c);
}

double gauc(std::span<const ScoredImpression> impressions, std::vector<UserAuc>* per_user) {
  std::map<std::uint64_t, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < impressions.size(); ++i) by_user[impressions[i].user_id].push_back(i);
  double weighted = 0.0, weight = 0.0;
  if (per_user) per_user->clear();
  for (const auto& [user, rows] : by_user) {
    std::vector<double> s;
    std::vector<int> c;
    int clicks = 0;
    for (auto r : rows) {
      s.push_back(impressions[r].score);
      c.push_back(impressions[r].click);
      clicks += impressions[r].click != 0;
    }
    if (clicks == 0 || clicks == static_cast<int>(rows.size())) continue;
    const double a = auc(s, c);
    weighted += static_cast<double>(rows.size()) * a;
    weight += static_cast<double>(rows.size());
    if (per_user) per_user->push_back({user, rows.size(), a});
  }
  require(weight > 0.0, ErrorKind::UndefinedMetric, "gauc needs at least one user with both classes");
  return weighted / weight;
}

double rela_impr(double measured, double base) {
  require(base != 0.5, ErrorKind::Numeric, "rela_impr: base AUC of 0.5 divides by zero");
  return ((measured - 0.5) / (base - 0.5) - 1.0) * 100.0;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), ErrorKind::Dimension, "cosine: width mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

}  // namespace

double relevance_score(std::span<const ScoredImpression> impressions, const encoder::EmbeddingIndex& index,
                       std::size_t top_k) {
  require(top_k > 0, ErrorKind::Validation, "relevance_score: top_k must be positive");
  // query -> item -> best score
  std::map<std::string, std::map<std::string, double>> best;
  for (const auto& imp : impressions) {
    auto& items = best[imp.query_text];
    auto [it, inserted] = items.emplace(imp.item_text, imp.score);
    if (!inserted) it->second = std::max(it->second, imp.score);
  }
  require(!best.empty(), ErrorKind::UndefinedMetric, "relevance_score over an empty ranking set");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [query, items] : best) {
    std::vector<std::pair<std::string, double>> ranked(items.begin(), items.end());
    // Map order makes the item text the tie-breaker.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    const auto q = index.text(query).values;
    const std::size_t k = std::min(top_k, ranked.size());
    for (std::size_t i = 0; i < k; ++i) sum += cosine(q, index.text(ranked[i].first).values);
    count += k;
  }
  return sum / static_cast<double>(count);
}

MetricReport evaluate(std::span<const ScoredImpression> impressions, const encoder::EmbeddingIndex& index) {
  MetricReport r;
  r.n_impressions = impressions.size();
  r.auc = auc(impressions);
  r.gauc = gauc(impressions, &r.per_user);
  r.relevance_score = relevance_score(impressions, index);
  return r;
}

std::vector<ScoredImpression> score_impressions(const std::vector<data::Sample>& samples,
                                                const model::EncodedDataset& encoded,
                                                const model::ModelParams& params) {
  require(samples.size() == encoded.size(), ErrorKind::Dimension, "samples and encoded rows differ in count");
  auto scores = model::score_dataset(encoded, params);
  std::vector<ScoredImpression> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out.push_back({s.user_id, s.query_text, s.item_text, scores[i].final_score, s.click});
  }
  return out;
}

std::vector<ComparisonRow> run_comparison(const std::vector<Variant>& variants, const std::vector<data::Sample>& test,
                                          const encoder::EmbeddingIndex& index) {
  require(!variants.empty(), ErrorKind::Validation, "comparison needs at least one variant");
  std::vector<ComparisonRow> rows;
  for (const auto& v : variants) {
    require(v.params != nullptr, ErrorKind::Validation, "variant '" + v.name + "' has no parameters");
    model::EncodedDataset encoded(test, index, v.params->schema);
    auto scored = score_impressions(test, encoded, *v.params);
    rows.push_back({v.name, evaluate(scored, index), 0.0, 0.0});
  }
  for (auto& r : rows) {
    r.rela_impr_auc = rela_impr(r.report.auc, rows[0].report.auc);
    r.rela_impr_gauc = rela_impr(r.report.gauc, rows[0].report.gauc);
  }
  return rows;
}

std::string format_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "variant\tAUC\tRelaImpr(AUC)\tGAUC\tRelaImpr(GAUC)\tRelevanceScore\timpressions\n";
  for (const auto& r : rows) {
    os << r.name << '\t' << format_fixed(r.report.auc, 4) << '\t' << format_fixed(r.rela_impr_auc, 2) << "%\t"
       << format_fixed(r.report.gauc, 4) << '\t' << format_fixed(r.rela_impr_gauc, 2) << "%\t"
       << format_fixed(r.report.relevance_score, 4) << '\t' << r.report.n_impressions << '\n';
  }
  return os.str();
}

std::string format_metrics(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    os << r.name << ".auc\t" << format_exact(r.report.auc) << '\n';
    os << r.name << ".gauc\t" << format_exact(r.report.gauc) << '\n';
    os << r.name << ".rela_impr_auc\t" << format_exact(r.rela_impr_auc) << '\n';
    os << r.name << ".rela_impr_gauc\t" << format_exact(r.rela_impr_gauc) << '\n';
    os << r.name << ".relevance_score\t" << format_exact(r.report.relevance_score) << '\n';
    os << r.name << ".impressions\t" << r.report.n_impressions << '\n';
  }
  return os.str();
}

}  // namespace prectr::eval
