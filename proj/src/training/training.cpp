#include "training/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "common/text.hpp"
#include "numerics/functions.hpp"
#include "numerics/ops.hpp"

namespace prectr::training {

using model::Batch;
using model::EncodedDataset;
using model::EncodedSample;
using model::ModelParams;
using num::LrGroup;
using num::Tape;
using num::Var;

namespace {

// Stage 2 shuffles from its own stream so skipping stage 1 leaves its order unchanged.
constexpr std::uint64_t kStage2Stream = 0x9e3779b97f4a7c15ULL;

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch_size) {
    const std::size_t hi = std::min(n, lo + batch_size);
    // A lone trailing row cannot form a regularizer group; it is skipped this epoch.
    if (hi - lo < 2 && !out.empty()) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

Batch gather(const EncodedDataset& data, const std::vector<std::size_t>& rows) {
  std::vector<const EncodedSample*> ptrs;
  ptrs.reserve(rows.size());
  for (auto i : rows) ptrs.push_back(&data[i]);
  return model::make_batch(ptrs);
}

void zero_grads(ModelParams& params) {
  for (auto* p : params.params()) p->zero_grad();
}

[[noreturn]] void diverged(const TrainConfig& config, const EncodedDataset& data, const std::vector<std::size_t>& rows,
                           int stage, std::size_t epoch, std::size_t batch, const std::string& why) {
  std::string where = "stage " + std::to_string(stage) + " epoch " + std::to_string(epoch) + " batch " +
                      std::to_string(batch);
  if (!config.divergence_dump.empty()) {
    std::ofstream out(config.divergence_dump);
    out << "# non-finite loss at " << where << ": " << why << "\n";
    out << "row\tclick\trsl\thistory\n";
    for (auto r : rows) out << r << '\t' << data[r].click << '\t' << data[r].rsl << '\t' << data[r].history_query.size() << '\n';
    where += " (batch written to " + config.divergence_dump.string() + ")";
  }
  fail(ErrorKind::Training, "training diverged at " + where + ": " + why);
}

}  // namespace

const char* to_string(Grouping g) { return g == Grouping::Batch ? "batch" : "query-group"; }

Grouping grouping_from_string(const std::string& s) {
  if (s == "batch") return Grouping::Batch;
  if (s == "query-group") return Grouping::QueryGroup;
  fail(ErrorKind::Validation, "unknown grouping '" + s + "' (expected batch or query-group)");
}

void validate(const TrainConfig& c) {
  require(c.batch_size >= 2, ErrorKind::Validation, "batch_size must be at least 2");
  for (double lr : {c.lr_stage1, c.lr_base, c.lr_rsl_finetune, c.lr_prim}) {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::Validation, "learning rates must be positive");
  }
  require(c.alpha >= 0.0 && c.beta >= 0.0 && c.gamma >= 0.0, ErrorKind::Validation,
          "alpha, beta and gamma must be non-negative");
  require(c.momentum >= 0.0 && c.momentum < 1.0, ErrorKind::Validation, "momentum must lie in [0, 1)");
  require(!(c.base_only && c.no_prim), ErrorKind::Validation, "--base-only conflicts with --no-prim");
  require(!(c.base_only && c.no_two_stage), ErrorKind::Validation, "--base-only conflicts with --no-two-stage");
}

model::ModelConfig apply_variant(model::ModelConfig m, const TrainConfig& c) {
  m.base_only = c.base_only;
  m.use_prim = !c.no_prim && !c.base_only;
  return m;
}

double effective_gamma(const TrainConfig& c) { return c.no_regularizer || c.base_only ? 0.0 : c.gamma; }

std::string format_log_line(const RiskReport& r) {
  return std::to_string(r.epoch) + '\t' + std::to_string(r.stage) + '\t' + std::to_string(r.batch) + '\t' +
         format_fixed(r.ctr_risk, 9) + '\t' + format_fixed(r.regularizer, 9) + '\t' + format_fixed(r.total, 9);
}

double listwise_label(int click, int rsl, double alpha, double beta) {
  const double y = click;
  return alpha * y + beta * (1.0 - y) * static_cast<double>(rsl);
}

double ctr_risk(std::span<const double> scores, std::span<const double> clicks) {
  require(!scores.empty(), ErrorKind::Validation, "ctr_risk needs at least one score");
  require(scores.size() == clicks.size(), ErrorKind::Dimension, "ctr_risk: scores and clicks differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double f = scores[i];
    require(f > 0.0 && f < 1.0, ErrorKind::Validation, "ctr_risk: score " + format_exact(f) + " outside (0, 1)");
    sum += clicks[i] * std::log(f) + (1.0 - clicks[i]) * std::log(1.0 - f);
  }
  return -sum / static_cast<double>(scores.size());
}

double consistency_regularizer(std::span<const double> scores, std::span<const double> labels) {
  require(scores.size() == labels.size(), ErrorKind::Dimension, "regularizer: scores and labels differ in length");
  require(scores.size() >= 2, ErrorKind::Validation, "regularizer needs at least two items");
  return num::kl_divergence(num::softmax(labels), num::softmax(scores));
}

std::vector<std::vector<std::size_t>> regularizer_groups(const Batch& batch, Grouping grouping) {
  std::vector<std::vector<std::size_t>> groups;
  if (grouping == Grouping::Batch) {
    groups.emplace_back(batch.size);
    std::iota(groups[0].begin(), groups[0].end(), 0);
    return groups;
  }
  std::map<std::uint64_t, std::vector<std::size_t>> by_query;
  for (std::size_t i = 0; i < batch.size; ++i) by_query[batch.query_key[i]].push_back(i);
  for (auto& [key, rows] : by_query)
    if (rows.size() >= 2) groups.push_back(std::move(rows));
  return groups;
}

RiskTerms record_total_risk(Tape& tape, ModelParams& params, const Batch& batch, const TrainConfig& config) {
  require(batch.size >= 2, ErrorKind::Validation, "total risk needs a batch of at least two");
  RiskTerms t;
  t.forward = model::forward(tape, params, batch);
  t.ctr = num::binary_cross_entropy(t.forward.final_score, batch.clicks);
  const double gamma = effective_gamma(config);
  std::vector<std::vector<std::size_t>> groups;
  if (gamma > 0.0) groups = regularizer_groups(batch, config.grouping);
  if (!groups.empty()) {
    std::vector<double> targets(batch.size);
    for (std::size_t i = 0; i < batch.size; ++i) {
      targets[i] = listwise_label(static_cast<int>(batch.clicks[i]), static_cast<int>(batch.rsl[i]), config.alpha,
                                  config.beta);
    }
    t.regularizer = num::softmax_kl(t.forward.final_score, targets, groups);
    t.total = num::add(t.ctr, num::scale(t.regularizer, gamma));
    t.has_regularizer = true;
  } else {
    t.regularizer = tape.constant(num::Tensor({1, 1}, 0.0));
    t.total = t.ctr;
  }
  return t;
}

RiskReport total_risk(const Batch& batch, ModelParams& params, const TrainConfig& config) {
  Tape tape;
  auto t = record_total_risk(tape, params, batch, config);
  RiskReport r;
  r.ctr_risk = tape.scalar(t.ctr);
  r.regularizer = tape.scalar(t.regularizer);
  r.total = tape.scalar(t.total);
  return r;
}

Var rsl_pretrain_loss(Tape& tape, ModelParams& params, const Batch& batch) {
  return num::cross_entropy_logits(model::rsl_logits(tape, params, batch), batch.level_index);
}

num::Sgd stage1_optimizer(const TrainConfig& c) { return num::Sgd({{LrGroup::RslFinetune, c.lr_stage1}}, c.momentum); }

num::Sgd stage2_optimizer(const TrainConfig& c) {
  std::map<LrGroup, double> rates{{LrGroup::Base, c.lr_base},
                                  {LrGroup::RslFinetune, c.no_two_stage ? c.lr_base : c.lr_rsl_finetune}};
  if (!c.no_prim) rates[LrGroup::Prim] = c.lr_prim;
  return num::Sgd(std::move(rates), c.momentum);
}

PretrainResult pretrain_rsl(const EncodedDataset& data, ModelParams& params, const TrainConfig& config) {
  validate(config);
  require(!params.config.base_only, ErrorKind::Precondition, "base-only models have no rsl module to pretrain");
  require(data.size() >= 2, ErrorKind::Training, "rsl pretraining needs at least two rows");
  std::set<int> classes;
  for (std::size_t i = 0; i < data.size(); ++i) classes.insert(data[i].rsl);
  require(classes.size() >= 2, ErrorKind::Training, "rsl pretraining needs at least two relevance levels");

  PretrainResult result;
  Rng rng(config.seed);
  auto opt = stage1_optimizer(config);
  auto all = params.params();
  for (std::size_t epoch = 0; epoch < config.stage1_epochs; ++epoch) {
    double sum = 0.0;
    std::size_t seen = 0, b = 0;
    for (const auto& rows : epoch_batches(data.size(), config.batch_size, rng)) {
      zero_grads(params);
      Tape tape;
      Var loss;
      try {
        loss = rsl_pretrain_loss(tape, params, gather(data, rows));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        diverged(config, data, rows, 1, epoch, b, e.what());
      }
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) diverged(config, data, rows, 1, epoch, b, "loss is " + format_exact(value));
      tape.backward(loss);
      opt.step(all);
      sum += value * static_cast<double>(rows.size());
      seen += rows.size();
      ++b;
    }
    result.epoch_losses.push_back(sum / static_cast<double>(seen));
  }
  zero_grads(params);
  return result;
}

double rsl_accuracy(const EncodedDataset& data, const ModelParams& params) {
  require(data.size() > 0, ErrorKind::Validation, "accuracy over an empty dataset");
  auto scores = model::score_dataset(data, params);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = scores[i].rsl_out.probs;
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) + 1;
    hits += best == data[i].rsl;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train_two_stage(const EncodedDataset& data, ModelParams& params, const TrainConfig& config,
                            std::ostream* log, const EpochCallback& on_epoch) {
  validate(config);
  require(params.config.base_only == config.base_only, ErrorKind::Precondition,
          "model architecture does not match the --base-only flag");
  require(!(config.no_prim && params.config.use_prim), ErrorKind::Precondition,
          "--no-prim needs a model built without the incentive module");
  require(data.size() >= 2, ErrorKind::Training, "training needs at least two rows");

  TrainResult result;
  if (!config.no_two_stage && !config.base_only) result.stage1 = pretrain_rsl(data, params, config);

  Rng rng(config.seed ^ kStage2Stream);
  auto opt = stage2_optimizer(config);
  auto all = params.params();
  if (log) *log << kLogHeader << '\n';
  for (std::size_t epoch = 0; epoch < config.stage2_epochs; ++epoch) {
    RiskReport mean;
    mean.epoch = epoch;
    std::size_t b = 0;
    for (const auto& rows : epoch_batches(data.size(), config.batch_size, rng)) {
      zero_grads(params);
      Tape tape;
      RiskReport r;
      r.epoch = epoch;
      r.batch = b;
      try {
        auto terms = record_total_risk(tape, params, gather(data, rows), config);
        r.ctr_risk = tape.scalar(terms.ctr);
        r.regularizer = tape.scalar(terms.regularizer);
        r.total = tape.scalar(terms.total);
        if (!std::isfinite(r.total)) diverged(config, data, rows, 2, epoch, b, "loss is " + format_exact(r.total));
        tape.backward(terms.total);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        diverged(config, data, rows, 2, epoch, b, e.what());
      }
      opt.step(all);
      if (log) *log << format_log_line(r) << '\n';
      mean.ctr_risk += r.ctr_risk;
      mean.regularizer += r.regularizer;
      mean.total += r.total;
      ++b;
    }
    const double n = static_cast<double>(b);
    mean.ctr_risk /= n;
    mean.regularizer /= n;
    mean.total /= n;
    mean.batch = b;
    result.epochs.push_back(mean);
    if (on_epoch) {
      zero_grads(params);
      on_epoch(mean, params);
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace prectr::training
