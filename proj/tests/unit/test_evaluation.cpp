#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "doctest.h"
#include "evaluation/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace prectr;
using namespace prectr::eval;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

encoder::EmbeddingIndex axis_index() {
  encoder::EmbeddingIndex index(2, "axes");
  index.put_text("q", {1.0, 0.0});
  index.put_text("a", {1.0, 0.0});
  index.put_text("b", {0.0, 1.0});
  index.put_text("c", {std::sqrt(0.5), std::sqrt(0.5)});
  return index;
}

}  // namespace

TEST_CASE("auc on separated, inverted and tied scores") {
  std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  std::vector<int> c{0, 0, 1, 1};
  CHECK(auc(s, c) == 1.0);
  std::vector<int> inv{1, 1, 0, 0};
  CHECK(auc(s, inv) == 0.0);
  std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  CHECK(auc(flat, c) == 0.5);
  std::vector<double> partial{0.1, 0.4, 0.35, 0.8};
  CHECK(auc(partial, c) == 0.75);
}

TEST_CASE("auc matches the pairwise count including ties") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(2, 60));
    std::vector<double> s(n);
    std::vector<int> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.between(0, 6)) / 6.0;  // coarse grid forces ties
      c[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    c[0] = 1;
    c[1] = 0;
    CHECK(auc(s, c) == testing::brute_force_auc(s, c));
  }
}

TEST_CASE("auc under negation and monotone transforms") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(2, 40));
    std::vector<double> s(n), neg(n), squashed(n);
    std::vector<int> c(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.uniform(-2, 2);
      neg[i] = -s[i];
      squashed[i] = 1.0 / (1.0 + std::exp(-3.0 * s[i]));
      c[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    c[0] = 1;
    c[1] = 0;
    const double a = auc(s, c);
    CHECK(std::abs(auc(neg, c) - (1.0 - a)) <= 1e-12);
    CHECK(auc(squashed, c) == a);
  }
}

TEST_CASE("auc errors") {
  std::vector<double> s{0.1, 0.2};
  std::vector<int> ones{1, 1};
  CHECK(kind_of([&] { auc(s, ones); }) == ErrorKind::UndefinedMetric);
  std::vector<double> nan{0.1, std::nan("")};
  std::vector<int> c{1, 0};
  CHECK(kind_of([&] { auc(nan, c); }) == ErrorKind::Validation);
}

TEST_CASE("gauc is the impression-weighted mean of per-user auc") {
  // User 1: 4 impressions, auc 0.5. User 2: 4 impressions, auc 0.75. User 3: single class, excluded.
  std::vector<ScoredImpression> imps{
      {1, "q", "a", 0.5, 1}, {1, "q", "b", 0.5, 0}, {1, "q", "c", 0.5, 0}, {1, "q", "a", 0.5, 1},
      {2, "q", "a", 0.1, 0}, {2, "q", "b", 0.4, 0}, {2, "q", "c", 0.35, 1}, {2, "q", "a", 0.8, 1},
      {3, "q", "a", 0.9, 1}, {3, "q", "b", 0.1, 1},
  };
  std::vector<UserAuc> users;
  CHECK(gauc(imps, &users) == 0.625);
  REQUIRE(users.size() == 2);
  CHECK(users[0].auc == 0.5);
  CHECK(users[1].auc == 0.75);

  std::vector<ScoredImpression> single(imps.begin() + 4, imps.begin() + 8);
  CHECK(gauc(single) == auc(single));

  std::vector<ScoredImpression> none(imps.begin() + 8, imps.end());
  CHECK(kind_of([&] { gauc(none); }) == ErrorKind::UndefinedMetric);
}

TEST_CASE("rela impr reproduces published style rows") {
  CHECK(rela_impr(0.75, 0.75) == 0.0);
  CHECK(rela_impr(0.7, 0.6) == doctest::Approx(100.0));
  // Rows as reported for a 0.6853 base.
  CHECK(std::abs(rela_impr(0.6887, 0.6853) - 1.83) < 0.05);
  CHECK(std::abs(rela_impr(0.6927, 0.6853) - 3.99) < 0.05);
  CHECK(rela_impr(0.6, 0.7) < 0.0);
  CHECK(kind_of([] { rela_impr(0.7, 0.5); }) == ErrorKind::Numeric);
}

TEST_CASE("relevance score ranks by score and averages cosine") {
  auto index = axis_index();
  std::vector<ScoredImpression> imps{{1, "q", "a", 0.9, 1}, {1, "q", "b", 0.1, 0}, {1, "q", "c", 0.5, 0}};
  const double all = (1.0 + 0.0 + std::sqrt(0.5)) / 3.0;
  CHECK(relevance_score(imps, index, 10) == doctest::Approx(all).epsilon(1e-14));
  CHECK(relevance_score(imps, index, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(relevance_score(imps, index, 2) == doctest::Approx((1.0 + std::sqrt(0.5)) / 2).epsilon(1e-14));

  // Repeated items count once at their best score.
  imps.push_back({2, "q", "b", 0.95, 1});
  CHECK(relevance_score(imps, index, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(relevance_score(imps, index, 10) == doctest::Approx(all).epsilon(1e-14));

  // Ties fall back to item text.
  std::vector<ScoredImpression> tied{{1, "q", "b", 0.5, 0}, {1, "q", "a", 0.5, 1}};
  CHECK(relevance_score(tied, index, 1) == doctest::Approx(1.0).epsilon(1e-14));

  std::vector<ScoredImpression> empty;
  CHECK(kind_of([&] { relevance_score(empty, index, 10); }) == ErrorKind::UndefinedMetric);
  std::vector<ScoredImpression> unknown{{1, "zzz", "a", 0.5, 1}};
  CHECK(kind_of([&] { relevance_score(unknown, index, 10); }) == ErrorKind::Lookup);
}

TEST_CASE("comparison against itself reports zero improvement") {
  auto corpus = data::generate_corpus(testing::small_corpus_config(300, 19));
  auto index = testing::random_index(corpus.samples, 4, 20);
  auto params = model::ModelParams::init(testing::small_model_config(4));
  Rng rng(21);
  testing::randomize(params, 0.5, rng);
  auto rows = run_comparison({{"a", &params}, {"b", &params}}, corpus.samples, index);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rela_impr_auc == 0.0);
  CHECK(rows[1].rela_impr_gauc == 0.0);
  CHECK(rows[1].report.auc == rows[0].report.auc);
  CHECK(rows[0].report.n_impressions == 300);
  CHECK(rows[0].report.auc > 0.0);
  CHECK(rows[0].report.relevance_score <= 1.0);

  auto table = format_table(rows);
  CHECK(table.rfind("variant\tAUC", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
  auto metrics = format_metrics(rows);
  CHECK(metrics.find("b.rela_impr_auc\t0\n") != std::string::npos);
}
