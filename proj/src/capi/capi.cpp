#include "prectr/prectr.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "config/run_config.hpp"
#include "data/corpus.hpp"
#include "encoder/encoder.hpp"
#include "encoder/index.hpp"
#include "evaluation/metrics.hpp"
#include "model/model.hpp"
#include "numerics/checkpoint.hpp"
#include "training/training.hpp"

using namespace prectr;

struct prectr_config {
  config::RunConfig value;
};

struct prectr_dataset {
  std::vector<data::Sample> samples;
  std::optional<std::vector<data::GroundTruth>> truth;
};

struct prectr_encoder {
  encoder::EncoderParams params;
  std::string stage;
};

struct prectr_index {
  encoder::EmbeddingIndex index;
};

struct prectr_model {
  model::ModelParams params;
};

struct prectr_report {
  std::vector<eval::ComparisonRow> rows;
};

struct prectr_ranking {
  struct Entry {
    std::uint64_t item_id;
    std::string item_text;
    model::ScoreBreakdown breakdown;
  };
  std::vector<Entry> entries;
};

namespace {

thread_local std::string g_last_error;

prectr_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return PRECTR_ERR_DIMENSION;
    case ErrorKind::Index: return PRECTR_ERR_INDEX;
    case ErrorKind::Graph: return PRECTR_ERR_GRAPH;
    case ErrorKind::Numeric: return PRECTR_ERR_NUMERIC;
    case ErrorKind::Precondition: return PRECTR_ERR_PRECONDITION;
    case ErrorKind::Validation: return PRECTR_ERR_VALIDATION;
    case ErrorKind::Divergence: return PRECTR_ERR_DIVERGENCE;
    case ErrorKind::Lookup: return PRECTR_ERR_LOOKUP;
    case ErrorKind::Training: return PRECTR_ERR_TRAINING;
    case ErrorKind::Parse: return PRECTR_ERR_PARSE;
    case ErrorKind::UndefinedMetric: return PRECTR_ERR_UNDEFINED_METRIC;
    case ErrorKind::Dependency: return PRECTR_ERR_DEPENDENCY;
    case ErrorKind::Io: return PRECTR_ERR_IO;
  }
  return PRECTR_ERR_INTERNAL;
}

struct NullArgument {
  const char* what;
};

template <class F>
prectr_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PRECTR_OK;
  } catch (const NullArgument& e) {
    g_last_error = std::string("null argument: ") + e.what;
    return PRECTR_ERR_INVALID_ARGUMENT;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PRECTR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PRECTR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return PRECTR_ERR_INTERNAL;
  }
}

template <class T>
T* need(T* p, const char* what) {
  if (!p) throw NullArgument{what};
  return p;
}

char* copy_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require_file(const char* path, const char* what) {
  require(std::filesystem::exists(path), ErrorKind::Dependency, std::string(what) + " not found: " + path);
}

prectr_dataset* make_dataset(std::vector<data::Sample> samples,
                             std::optional<std::vector<data::GroundTruth>> truth) {
  auto* ds = new prectr_dataset;
  ds->samples = std::move(samples);
  ds->truth = std::move(truth);
  return ds;
}

template <class T>
std::vector<T> slice(const std::vector<T>& v, std::size_t from, std::size_t to) {
  return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to));
}

}  // namespace

extern "C" {

const char* prectr_last_error(void) { return g_last_error.c_str(); }

const char* prectr_status_name(prectr_status status) {
  switch (status) {
    case PRECTR_OK: return "ok";
    case PRECTR_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case PRECTR_ERR_DIMENSION: return "dimension";
    case PRECTR_ERR_INDEX: return "index";
    case PRECTR_ERR_GRAPH: return "graph";
    case PRECTR_ERR_NUMERIC: return "numeric";
    case PRECTR_ERR_PRECONDITION: return "precondition";
    case PRECTR_ERR_VALIDATION: return "validation";
    case PRECTR_ERR_DIVERGENCE: return "divergence";
    case PRECTR_ERR_LOOKUP: return "lookup";
    case PRECTR_ERR_TRAINING: return "training";
    case PRECTR_ERR_PARSE: return "parse";
    case PRECTR_ERR_UNDEFINED_METRIC: return "undefined-metric";
    case PRECTR_ERR_DEPENDENCY: return "dependency";
    case PRECTR_ERR_IO: return "io";
    case PRECTR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* prectr_version(void) { return "1.0.0"; }

void prectr_string_free(char* s) { std::free(s); }

// ---- configuration

prectr_status prectr_config_new(prectr_config** out) {
  return guarded([&] { *need(out, "out") = new prectr_config; });
}

void prectr_config_free(prectr_config* config) { delete config; }

prectr_status prectr_config_load(prectr_config* config, const char* path) {
  return guarded([&] { config::apply_file(need(config, "config")->value, need(path, "path")); });
}

prectr_status prectr_config_set(prectr_config* config, const char* key, const char* value) {
  return guarded([&] { config::set(need(config, "config")->value, need(key, "key"), need(value, "value")); });
}

prectr_status prectr_config_get(const prectr_config* config, const char* key, char** value) {
  return guarded([&] {
    *need(value, "value") = copy_string(config::get(need(config, "config")->value, need(key, "key")));
  });
}

prectr_status prectr_config_validate(const prectr_config* config) {
  return guarded([&] { config::validate(need(config, "config")->value); });
}

prectr_status prectr_config_resolved(const prectr_config* config, char** text) {
  return guarded([&] { *need(text, "text") = copy_string(config::resolved(need(config, "config")->value)); });
}

// ---- datasets

prectr_status prectr_dataset_generate(const prectr_config* config, prectr_dataset** out) {
  return guarded([&] {
    need(out, "out");
    const auto& cfg = need(config, "config")->value;
    data::validate(cfg.data);
    auto corpus = data::generate_corpus(cfg.data);
    *out = make_dataset(std::move(corpus.samples), std::move(corpus.truth));
  });
}

prectr_status prectr_dataset_read(const char* path, prectr_dataset** out) {
  return guarded([&] {
    need(out, "out");
    require_file(need(path, "path"), "dataset");
    *out = make_dataset(data::read_dataset(path), std::nullopt);
  });
}

prectr_status prectr_dataset_write(const prectr_dataset* dataset, const char* path) {
  return guarded([&] { data::write_dataset(need(dataset, "dataset")->samples, need(path, "path")); });
}

prectr_status prectr_dataset_write_truth(const prectr_dataset* dataset, const char* path) {
  return guarded([&] {
    require(need(dataset, "dataset")->truth.has_value(), ErrorKind::Precondition,
            "dataset carries no ground truth");
    data::write_truth(*dataset->truth, need(path, "path"));
  });
}

prectr_status prectr_dataset_split(const prectr_dataset* dataset, prectr_dataset** train, prectr_dataset** valid,
                                   prectr_dataset** test) {
  return guarded([&] {
    need(train, "train");
    need(valid, "valid");
    need(test, "test");
    const auto& ds = *need(dataset, "dataset");
    const auto n = ds.samples.size();
    const auto sz = data::split_sizes(n);
    const std::size_t cuts[4] = {0, sz.train, sz.train + sz.valid, n};
    std::unique_ptr<prectr_dataset> parts[3];
    for (int i = 0; i < 3; ++i) {
      std::optional<std::vector<data::GroundTruth>> truth;
      if (ds.truth) truth = slice(*ds.truth, cuts[i], cuts[i + 1]);
      parts[i].reset(make_dataset(slice(ds.samples, cuts[i], cuts[i + 1]), std::move(truth)));
    }
    *train = parts[0].release();
    *valid = parts[1].release();
    *test = parts[2].release();
  });
}

prectr_status prectr_dataset_size(const prectr_dataset* dataset, size_t* size) {
  return guarded([&] { *need(size, "size") = need(dataset, "dataset")->samples.size(); });
}

void prectr_dataset_free(prectr_dataset* dataset) { delete dataset; }

// ---- encoder

prectr_status prectr_encoder_pretrain(const prectr_config* config, const prectr_dataset* train,
                                      prectr_encoder** out, double* final_loss) {
  return guarded([&] {
    need(out, "out");
    const auto& cfg = need(config, "config")->value;
    std::vector<encoder::ClickPair> pairs;
    for (const auto& s : need(train, "train")->samples) pairs.push_back({s.query_text, s.item_text, s.click != 0});
    Rng rng(cfg.encoder.seed);
    auto enc = std::make_unique<prectr_encoder>();
    enc->params = encoder::EncoderParams(cfg.encoder, rng);
    auto trace = encoder::pretrain_encoder(pairs, cfg.encoder, enc->params);
    enc->stage = "pretrained";
    if (final_loss) *final_loss = trace.final_loss;
    *out = enc.release();
  });
}

prectr_status prectr_encoder_finetune(const prectr_config* config, prectr_encoder* encoder,
                                      const prectr_dataset* train, double* final_loss) {
  return guarded([&] {
    const auto& cfg = need(config, "config")->value;
    need(encoder, "encoder");
    std::vector<encoder::LabeledPair> pairs;
    for (const auto& s : need(train, "train")->samples) pairs.push_back({s.query_text, s.item_text, s.rsl});
    auto trace = encoder::finetune_encoder(encoder->params, pairs, cfg.encoder);
    encoder->stage = "finetuned";
    if (final_loss) *final_loss = trace.final_loss;
  });
}

prectr_status prectr_encoder_read(const char* path, prectr_encoder** out) {
  return guarded([&] {
    need(out, "out");
    require_file(need(path, "path"), "encoder checkpoint");
    auto ckpt = num::load_checkpoint(path);
    auto enc = std::make_unique<prectr_encoder>();
    enc->params = encoder::EncoderParams::from_checkpoint(ckpt);
    auto stage = ckpt.meta.find("stage");
    enc->stage = stage == ckpt.meta.end() ? "pretrained" : stage->second;
    *out = enc.release();
  });
}

prectr_status prectr_encoder_write(const prectr_encoder* encoder, const char* path) {
  return guarded([&] {
    auto ckpt = need(encoder, "encoder")->params.to_checkpoint();
    ckpt.meta["stage"] = encoder->stage;
    num::save_checkpoint(ckpt, need(path, "path"));
  });
}

prectr_status prectr_encoder_stage(const prectr_encoder* encoder, char** stage) {
  return guarded([&] { *need(stage, "stage") = copy_string(need(encoder, "encoder")->stage); });
}

void prectr_encoder_free(prectr_encoder* encoder) { delete encoder; }

// ---- index

prectr_status prectr_index_build(const prectr_encoder* encoder, const prectr_dataset* const* datasets,
                                 size_t n_datasets, prectr_index** out) {
  return guarded([&] {
    need(out, "out");
    need(encoder, "encoder");
    require(n_datasets > 0, ErrorKind::Validation, "index build needs at least one dataset");
    need(datasets, "datasets");
    std::vector<std::string> texts;
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t d = 0; d < n_datasets; ++d) {
      for (const auto& s : need(datasets[d], "dataset")->samples) {
        texts.push_back(s.query_text);
        texts.push_back(s.item_text);
        pairs.emplace_back(s.query_text, s.item_text);
        for (const auto& h : s.history) {
          texts.push_back(h.query);
          texts.push_back(h.item_text);
          pairs.emplace_back(h.query, h.item_text);
        }
      }
    }
    auto idx = std::make_unique<prectr_index>();
    idx->index = encoder::build_index(texts, pairs, encoder->params);
    *out = idx.release();
  });
}

prectr_status prectr_index_read(const char* path, prectr_index** out) {
  return guarded([&] {
    need(out, "out");
    require_file(need(path, "path"), "embedding index");
    auto idx = std::make_unique<prectr_index>();
    idx->index = encoder::EmbeddingIndex::read(path);
    *out = idx.release();
  });
}

prectr_status prectr_index_write(const prectr_index* index, const char* path) {
  return guarded([&] { need(index, "index")->index.write(need(path, "path")); });
}

prectr_status prectr_index_set_fallback(prectr_index* index, const prectr_encoder* encoder) {
  return guarded([&] {
    need(index, "index");
    if (encoder) {
      require(encoder->params.dim() == index->index.dim(), ErrorKind::Dimension,
              "fallback encoder width differs from the index");
    }
    index->index.set_fallback(encoder ? &encoder->params : nullptr);
  });
}

prectr_status prectr_index_size(const prectr_index* index, size_t* size) {
  return guarded([&] { *need(size, "size") = need(index, "index")->index.size(); });
}

void prectr_index_free(prectr_index* index) { delete index; }

// ---- model

prectr_status prectr_model_train(const prectr_config* config, const prectr_dataset* train, const prectr_index* index,
                                 const char* log_path, const char* dump_path, prectr_model** out) {
  return guarded([&] {
    need(out, "out");
    const auto& cfg = need(config, "config")->value;
    const auto& idx = need(index, "index")->index;
    config::validate(cfg);
    auto mc = config::effective_model(cfg);
    require(mc.text_dim == idx.dim(), ErrorKind::Dimension,
            "encoder.dim is " + std::to_string(mc.text_dim) + " but the index has width " + std::to_string(idx.dim()));
    auto tc = cfg.train;
    if (dump_path) tc.divergence_dump = dump_path;

    auto m = std::make_unique<prectr_model>();
    m->params = model::ModelParams::init(mc);
    model::EncodedDataset encoded(need(train, "train")->samples, idx, m->params.schema);
    std::ofstream log;
    if (log_path) {
      log.open(log_path, std::ios::binary | std::ios::trunc);
      require(static_cast<bool>(log), ErrorKind::Io, std::string("cannot write training log ") + log_path);
    }
    training::train_two_stage(encoded, m->params, tc, log_path ? &log : nullptr);
    if (log_path) {
      log.close();
      require(static_cast<bool>(log), ErrorKind::Io, std::string("failed writing training log ") + log_path);
    }
    *out = m.release();
  });
}

prectr_status prectr_model_read(const char* path, prectr_model** out) {
  return guarded([&] {
    need(out, "out");
    require_file(need(path, "path"), "model checkpoint");
    auto m = std::make_unique<prectr_model>();
    m->params = model::ModelParams::from_checkpoint(num::load_checkpoint(path));
    *out = m.release();
  });
}

prectr_status prectr_model_write(const prectr_model* model, const char* path) {
  return guarded([&] { num::save_checkpoint(need(model, "model")->params.to_checkpoint(), need(path, "path")); });
}

void prectr_model_free(prectr_model* model) { delete model; }

// ---- evaluation

prectr_status prectr_compare(const char* const* names, const prectr_model* const* models, size_t n,
                             const prectr_dataset* test, const prectr_index* index, prectr_report** out) {
  return guarded([&] {
    need(out, "out");
    require(n > 0, ErrorKind::Validation, "comparison needs at least one model");
    need(names, "names");
    need(models, "models");
    std::vector<eval::Variant> variants;
    for (std::size_t i = 0; i < n; ++i)
      variants.push_back({need(names[i], "name"), &need(models[i], "model")->params});
    auto report = std::make_unique<prectr_report>();
    report->rows = eval::run_comparison(variants, need(test, "test")->samples, need(index, "index")->index);
    *out = report.release();
  });
}

prectr_status prectr_report_rows(const prectr_report* report, size_t* rows) {
  return guarded([&] { *need(rows, "rows") = need(report, "report")->rows.size(); });
}

prectr_status prectr_report_metric(const prectr_report* report, size_t row, prectr_metric metric, double* value) {
  return guarded([&] {
    need(value, "value");
    require(row < need(report, "report")->rows.size(), ErrorKind::Index, "report row out of range");
    const auto& r = report->rows[row];
    switch (metric) {
      case PRECTR_METRIC_AUC: *value = r.report.auc; return;
      case PRECTR_METRIC_GAUC: *value = r.report.gauc; return;
      case PRECTR_METRIC_RELA_IMPR_AUC: *value = r.rela_impr_auc; return;
      case PRECTR_METRIC_RELA_IMPR_GAUC: *value = r.rela_impr_gauc; return;
      case PRECTR_METRIC_RELEVANCE_SCORE: *value = r.report.relevance_score; return;
    }
    fail(ErrorKind::Validation, "unknown metric");
  });
}

prectr_status prectr_report_table(const prectr_report* report, char** text) {
  return guarded([&] { *need(text, "text") = copy_string(eval::format_table(need(report, "report")->rows)); });
}

prectr_status prectr_report_metrics(const prectr_report* report, char** text) {
  return guarded([&] { *need(text, "text") = copy_string(eval::format_metrics(need(report, "report")->rows)); });
}

void prectr_report_free(prectr_report* report) { delete report; }

// ---- ranking

prectr_status prectr_rank(const prectr_model* model, const prectr_index* index, uint64_t user_id, const char* query,
                          const prectr_history_entry* history, size_t n_history, const prectr_candidate* candidates,
                          size_t n_candidates, prectr_ranking** out) {
  return guarded([&] {
    need(out, "out");
    const auto& params = need(model, "model")->params;
    const auto& idx = need(index, "index")->index;
    need(query, "query");
    require(n_candidates > 0, ErrorKind::Validation, "no candidates to rank");
    need(candidates, "candidates");
    require(n_history <= data::kMaxHistory, ErrorKind::Validation, "history longer than 50 entries");
    if (n_history > 0) need(history, "history");

    std::vector<data::HistoryEntry> hist;
    for (std::size_t i = 0; i < n_history; ++i)
      hist.push_back({need(history[i].query, "history query"), need(history[i].item_text, "history item")});
    std::vector<data::Sample> rows;
    for (std::size_t i = 0; i < n_candidates; ++i) {
      data::Sample s;
      s.user_id = user_id;
      s.query_text = query;
      s.item_id = candidates[i].item_id;
      s.item_text = need(candidates[i].item_text, "candidate text");
      s.category_match = data::category_match(s.query_text, s.item_text);
      s.contains_query = data::contains_query(s.query_text, s.item_text);
      s.history = hist;
      rows.push_back(std::move(s));
    }
    model::EncodedDataset encoded(rows, idx, params.schema);
    auto scores = model::score_dataset(encoded, params);

    auto ranking = std::make_unique<prectr_ranking>();
    for (std::size_t i = 0; i < rows.size(); ++i)
      ranking->entries.push_back({rows[i].item_id, rows[i].item_text, scores[i]});
    std::stable_sort(ranking->entries.begin(), ranking->entries.end(), [](const auto& a, const auto& b) {
      if (a.breakdown.final_score != b.breakdown.final_score) return a.breakdown.final_score > b.breakdown.final_score;
      return a.item_id < b.item_id;
    });
    *out = ranking.release();
  });
}

prectr_status prectr_ranking_size(const prectr_ranking* ranking, size_t* size) {
  return guarded([&] { *need(size, "size") = need(ranking, "ranking")->entries.size(); });
}

prectr_status prectr_ranking_item(const prectr_ranking* ranking, size_t position, uint64_t* item_id,
                                  const char** item_text, double* score) {
  return guarded([&] {
    require(position < need(ranking, "ranking")->entries.size(), ErrorKind::Index, "ranking position out of range");
    const auto& e = ranking->entries[position];
    if (item_id) *item_id = e.item_id;
    if (item_text) *item_text = e.item_text.c_str();
    if (score) *score = e.breakdown.final_score;
  });
}

prectr_status prectr_ranking_explain(const prectr_ranking* ranking, size_t position, char** line) {
  return guarded([&] {
    need(line, "line");
    require(position < need(ranking, "ranking")->entries.size(), ErrorKind::Index, "ranking position out of range");
    *line = copy_string(model::serialize(ranking->entries[position].breakdown));
  });
}

void prectr_ranking_free(prectr_ranking* ranking) { delete ranking; }

}  // extern "C"
