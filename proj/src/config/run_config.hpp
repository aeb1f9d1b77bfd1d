#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "data/corpus.hpp"
#include "encoder/encoder.hpp"
#include "model/model.hpp"
#include "training/training.hpp"

namespace prectr::config {

// Every tunable of a pipeline run. Keys are "<section>.<field>", for
// example "train.gamma" or "data.n_impressions". The model text width is
// not a key: it always follows encoder.dim.
struct RunConfig {
  data::GeneratorConfig data;
  encoder::EncoderConfig encoder;
  model::ModelConfig model;
  training::TrainConfig train;
};

// All keys in their canonical order.
std::vector<std::string> keys();

// Unknown keys are Validation errors, unparsable values Parse errors.
void set(RunConfig& config, const std::string& key, const std::string& value);
std::string get(const RunConfig& config, const std::string& key);

// key=value lines; '#' starts a comment; blank lines are ignored.
void apply_text(RunConfig& config, const std::string& text);
void apply_file(RunConfig& config, const std::filesystem::path& path);

// Every key, one per line, in canonical order. Feeding the result back
// through apply_text reproduces the same configuration.
std::string resolved(const RunConfig& config);

// Section validators plus cross-section checks.
void validate(const RunConfig& config);

// Model config with the text width and variant switches filled in.
model::ModelConfig effective_model(const RunConfig& config);

}  // namespace prectr::config
