#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "model/model.hpp"
#include "numerics/optimizer.hpp"

namespace prectr::training {

enum class Grouping { Batch, QueryGroup };

const char* to_string(Grouping g);
Grouping grouping_from_string(const std::string& s);

struct TrainConfig {
  std::size_t batch_size = 4096;
  double lr_stage1 = 1e-4;
  double lr_base = 1e-4;
  double lr_rsl_finetune = 1e-5;
  double lr_prim = 1e-4;
  double alpha = 4.0;
  double beta = 1.0;
  double gamma = 0.3;
  std::size_t stage1_epochs = 1;
  std::size_t stage2_epochs = 1;
  std::uint64_t seed = 1;
  Grouping grouping = Grouping::Batch;
  double momentum = 0.0;

  // Ablation variants.
  bool no_two_stage = false;
  bool no_regularizer = false;
  bool no_prim = false;
  bool base_only = false;

  // Where the last batch is written if training diverges; empty disables.
  std::filesystem::path divergence_dump;
};

// Rejects out-of-range values and conflicting variant flags.
void validate(const TrainConfig& config);

// Model architecture switches implied by the variant flags.
model::ModelConfig apply_variant(model::ModelConfig model, const TrainConfig& config);

// gamma after the no-regularizer flag.
double effective_gamma(const TrainConfig& config);

struct RiskReport {
  double ctr_risk = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  int stage = 2;
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

// epoch \t stage \t batch \t ctr_risk \t regularizer \t total
std::string format_log_line(const RiskReport& r);
inline constexpr const char* kLogHeader = "epoch\tstage\tbatch\tctr_risk\tregularizer\ttotal";

// alpha * y + beta * (1 - y) * rsl.
double listwise_label(int click, int rsl, double alpha, double beta);

// Mean binary cross-entropy; every score must lie strictly inside (0, 1).
double ctr_risk(std::span<const double> scores, std::span<const double> clicks);

// KL(softmax(labels) || softmax(scores)); needs at least two items.
double consistency_regularizer(std::span<const double> scores, std::span<const double> labels);

// Regularizer groups for a batch: the whole batch, or one group per query
// with at least two impressions.
std::vector<std::vector<std::size_t>> regularizer_groups(const model::Batch& batch, Grouping grouping);

struct RiskTerms {
  model::Forward forward;
  num::Var ctr, regularizer, total;
  bool has_regularizer = false;
};

// Records the full objective on the tape.
RiskTerms record_total_risk(num::Tape& tape, model::ModelParams& params, const model::Batch& batch,
                            const TrainConfig& config);

// Evaluates the objective for one batch without updating anything.
RiskReport total_risk(const model::Batch& batch, model::ModelParams& params, const TrainConfig& config);

// Multi-class cross-entropy of the rsl head against the rsl labels.
num::Var rsl_pretrain_loss(num::Tape& tape, model::ModelParams& params, const model::Batch& batch);

num::Sgd stage1_optimizer(const TrainConfig& config);
num::Sgd stage2_optimizer(const TrainConfig& config);

struct PretrainResult {
  std::vector<double> epoch_losses;
};

// Trains the rsl network only; every other group is left untouched.
PretrainResult pretrain_rsl(const model::EncodedDataset& data, model::ModelParams& params,
                            const TrainConfig& config);

// Fraction of rows whose argmax rsl prediction equals the label.
double rsl_accuracy(const model::EncodedDataset& data, const model::ModelParams& params);

struct TrainResult {
  PretrainResult stage1;
  std::vector<RiskReport> epochs;  // stage-2 per-epoch means
};

using EpochCallback = std::function<void(const RiskReport& epoch_mean, const model::ModelParams& params)>;

// Stage 1 (unless no_two_stage) then joint stage-2 training. Every batch
// appends one line to `log` when it is non-null; `on_epoch` sees each
// finished stage-2 epoch.
TrainResult train_two_stage(const model::EncodedDataset& data, model::ModelParams& params,
                            const TrainConfig& config, std::ostream* log = nullptr,
                            const EpochCallback& on_epoch = {});

}  // namespace prectr::training
