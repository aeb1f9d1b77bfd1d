#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "prectr/prectr.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Exit codes: 0 success, 1 bad input, 2 runtime failure.
struct Failure {
  int exit_code;
  std::string message;
};

int exit_code_for(prectr_status s) {
  switch (s) {
    case PRECTR_ERR_VALIDATION:
    case PRECTR_ERR_PARSE:
    case PRECTR_ERR_PRECONDITION:
    case PRECTR_ERR_INVALID_ARGUMENT:
      return 1;
    default:
      return 2;
  }
}

void check(prectr_status s) {
  if (s != PRECTR_OK)
    throw Failure{exit_code_for(s), std::string(prectr_status_name(s)) + " error: " + prectr_last_error()};
}

[[noreturn]] void bad_input(const std::string& message) { throw Failure{1, "validation error: " + message}; }
[[noreturn]] void runtime_failure(const std::string& message) { throw Failure{2, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Config = std::unique_ptr<prectr_config, Deleter<prectr_config, prectr_config_free>>;
using Dataset = std::unique_ptr<prectr_dataset, Deleter<prectr_dataset, prectr_dataset_free>>;
using Encoder = std::unique_ptr<prectr_encoder, Deleter<prectr_encoder, prectr_encoder_free>>;
using Index = std::unique_ptr<prectr_index, Deleter<prectr_index, prectr_index_free>>;
using Model = std::unique_ptr<prectr_model, Deleter<prectr_model, prectr_model_free>>;
using Report = std::unique_ptr<prectr_report, Deleter<prectr_report, prectr_report_free>>;
using Ranking = std::unique_ptr<prectr_ranking, Deleter<prectr_ranking, prectr_ranking_free>>;

std::string take(char* s) {
  std::string out(s ? s : "");
  prectr_string_free(s);
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad_input("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) runtime_failure("io error: cannot write " + path.string());
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) runtime_failure("io error: cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) runtime_failure("sha256 unavailable");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

// Options shared by every subcommand.
struct Common {
  std::string out_dir;
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out-dir", c.out_dir, "Directory receiving every artifact")->required();
  cmd->add_option("--config", c.config_file, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override one key (key=value); repeatable");
}

void set_key(prectr_config* cfg, const std::string& key, const std::string& value) {
  check(prectr_config_set(cfg, key.c_str(), value.c_str()));
}

Config load_config(const Common& c) {
  prectr_config* raw = nullptr;
  check(prectr_config_new(&raw));
  Config cfg(raw);
  if (!c.config_file.empty()) check(prectr_config_load(cfg.get(), c.config_file.c_str()));
  for (const auto& kv : c.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) bad_input("--set expects key=value, got '" + kv + "'");
    set_key(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

// One run: resolves the config, tracks inputs and outputs, writes the manifest.
class Run {
 public:
  Run(std::string command, const Common& common, Config cfg)
      : command_(std::move(command)), dir_(common.out_dir), cfg_(std::move(cfg)),
        start_(std::chrono::steady_clock::now()) {}

  prectr_config* config() { return cfg_.get(); }
  const fs::path& dir() const { return dir_; }

  void prepare(bool refuse_non_empty, bool force) {
    check(prectr_config_validate(cfg_.get()));
    if (refuse_non_empty && !force && fs::exists(dir_) && fs::is_directory(dir_) && !fs::is_empty(dir_))
      bad_input("output directory " + dir_.string() + " is not empty (use --force)");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) runtime_failure("io error: cannot create " + dir_.string() + ": " + ec.message());
    char* text = nullptr;
    check(prectr_config_resolved(cfg_.get(), &text));
    resolved_ = take(text);
    write_text(dir_ / "config.resolved", resolved_);
  }

  void input(const fs::path& p) { inputs_.push_back(p); }
  fs::path output(const std::string& name) {
    outputs_.push_back(dir_ / name);
    return outputs_.back();
  }

  void finish() {
    json manifest;
    manifest["command"] = command_;
    json cfg = json::object();
    std::istringstream in(resolved_);
    for (std::string line; std::getline(in, line);) {
      auto eq = line.find('=');
      if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    manifest["config"] = cfg;
    manifest["inputs"] = digests(inputs_);
    manifest["outputs"] = digests(outputs_);
    manifest["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  static json digests(const std::vector<fs::path>& paths) {
    json out = json::array();
    for (const auto& p : paths) {
      if (!fs::exists(p)) continue;
      out.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
    }
    return out;
  }

  std::string command_;
  fs::path dir_;
  Config cfg_;
  std::string resolved_;
  std::vector<fs::path> inputs_, outputs_;
  std::chrono::steady_clock::time_point start_;
};

Dataset read_dataset(Run& run, const std::string& path) {
  prectr_dataset* raw = nullptr;
  check(prectr_dataset_read(path.c_str(), &raw));
  run.input(path);
  return Dataset(raw);
}

Index read_index(Run& run, const std::string& path) {
  prectr_index* raw = nullptr;
  check(prectr_index_read(path.c_str(), &raw));
  run.input(path);
  return Index(raw);
}

Encoder read_encoder(Run& run, const std::string& path) {
  prectr_encoder* raw = nullptr;
  check(prectr_encoder_read(path.c_str(), &raw));
  run.input(path);
  return Encoder(raw);
}

Model read_model(Run& run, const std::string& path) {
  prectr_model* raw = nullptr;
  check(prectr_model_read(path.c_str(), &raw));
  run.input(path);
  return Model(raw);
}

// ---- gen-data

struct GenArgs {
  Common common;
  long long n_impressions = -1;
  long long seed = -1;
  bool force = false;
};

void cmd_gen_data(GenArgs& a) {
  auto cfg = load_config(a.common);
  if (a.n_impressions >= 0) set_key(cfg.get(), "data.n_impressions", std::to_string(a.n_impressions));
  if (a.seed >= 0) set_key(cfg.get(), "data.seed", std::to_string(a.seed));
  Run run("gen-data", a.common, std::move(cfg));
  run.prepare(true, a.force);

  prectr_dataset* raw = nullptr;
  check(prectr_dataset_generate(run.config(), &raw));
  Dataset all(raw);
  prectr_dataset *tr = nullptr, *va = nullptr, *te = nullptr;
  check(prectr_dataset_split(all.get(), &tr, &va, &te));
  Dataset train(tr), valid(va), test(te);

  check(prectr_dataset_write(all.get(), run.output("dataset.tsv").c_str()));
  check(prectr_dataset_write_truth(all.get(), run.output("truth.tsv").c_str()));
  const std::pair<const char*, prectr_dataset*> parts[] = {
      {"train.tsv", train.get()}, {"valid.tsv", valid.get()}, {"test.tsv", test.get()}};
  for (const auto& [name, ds] : parts) {
    check(prectr_dataset_write(ds, run.output(name).c_str()));
    auto truth_name = std::string(name).replace(std::string(name).find(".tsv"), 4, ".truth.tsv");
    check(prectr_dataset_write_truth(ds, run.output(truth_name).c_str()));
  }
  run.finish();

  std::size_t n = 0, ntr = 0, nva = 0, nte = 0;
  prectr_dataset_size(all.get(), &n);
  prectr_dataset_size(train.get(), &ntr);
  prectr_dataset_size(valid.get(), &nva);
  prectr_dataset_size(test.get(), &nte);
  std::cout << "impressions " << n << " (train " << ntr << ", valid " << nva << ", test " << nte << ")\n";
}

// ---- encoder

struct EncoderArgs {
  Common common;
  std::string train;
  std::string encoder;
  std::vector<std::string> data;
};

void cmd_encoder_pretrain(EncoderArgs& a) {
  Run run("encoder pretrain", a.common, load_config(a.common));
  run.prepare(false, false);
  auto train = read_dataset(run, a.train);
  prectr_encoder* raw = nullptr;
  double loss = 0.0;
  check(prectr_encoder_pretrain(run.config(), train.get(), &raw, &loss));
  Encoder enc(raw);
  check(prectr_encoder_write(enc.get(), run.output("encoder.ckpt").c_str()));
  run.finish();
  std::cout << "pretrain loss " << loss << "\n";
}

void cmd_encoder_finetune(EncoderArgs& a) {
  Run run("encoder finetune", a.common, load_config(a.common));
  run.prepare(false, false);
  auto enc = read_encoder(run, a.encoder);
  auto train = read_dataset(run, a.train);
  double loss = 0.0;
  check(prectr_encoder_finetune(run.config(), enc.get(), train.get(), &loss));
  check(prectr_encoder_write(enc.get(), run.output("encoder.ckpt").c_str()));
  run.finish();
  std::cout << "finetune loss " << loss << "\n";
}

void cmd_encoder_build_index(EncoderArgs& a) {
  Run run("encoder build-index", a.common, load_config(a.common));
  run.prepare(false, false);
  auto enc = read_encoder(run, a.encoder);
  std::vector<Dataset> sets;
  std::vector<const prectr_dataset*> ptrs;
  for (const auto& path : a.data) {
    sets.push_back(read_dataset(run, path));
    ptrs.push_back(sets.back().get());
  }
  prectr_index* raw = nullptr;
  check(prectr_index_build(enc.get(), ptrs.data(), ptrs.size(), &raw));
  Index index(raw);
  check(prectr_index_write(index.get(), run.output("index.tsv").c_str()));
  run.finish();
  std::size_t n = 0;
  prectr_index_size(index.get(), &n);
  std::cout << "index entries " << n << "\n";
}

// ---- train

struct Variant {
  bool no_two_stage = false, no_regularizer = false, no_prim = false, base_only = false;
};

void add_variant_flags(CLI::App* cmd, Variant& v) {
  cmd->add_flag("--no-two-stage", v.no_two_stage, "Skip rsl pretraining");
  cmd->add_flag("--no-regularizer", v.no_regularizer, "Force gamma to 0");
  cmd->add_flag("--no-prim", v.no_prim, "Disable the personalized incentive");
  cmd->add_flag("--base-only", v.base_only, "Plain CTR network without fusion");
}

void apply_variant(prectr_config* cfg, const Variant& v) {
  if (v.no_two_stage) set_key(cfg, "train.no_two_stage", "true");
  if (v.no_regularizer) set_key(cfg, "train.no_regularizer", "true");
  if (v.no_prim) set_key(cfg, "train.no_prim", "true");
  if (v.base_only) set_key(cfg, "train.base_only", "true");
}

struct TrainArgs {
  Common common;
  Variant variant;
  std::string train, index;
};

Model train_model(Run& run, prectr_dataset* train, prectr_index* index, const std::string& prefix) {
  const auto log = run.output(prefix + "train.log");
  const auto dump = run.dir() / (prefix + "divergence.tsv");
  prectr_model* raw = nullptr;
  check(prectr_model_train(run.config(), train, index, log.c_str(), dump.c_str(), &raw));
  Model m(raw);
  check(prectr_model_write(m.get(), run.output(prefix + "model.ckpt").c_str()));
  return m;
}

void cmd_train(TrainArgs& a) {
  auto cfg = load_config(a.common);
  apply_variant(cfg.get(), a.variant);
  Run run("train", a.common, std::move(cfg));
  run.prepare(false, false);
  auto train = read_dataset(run, a.train);
  auto index = read_index(run, a.index);
  train_model(run, train.get(), index.get(), "");
  run.finish();
  std::cout << "model written to " << (run.dir() / "model.ckpt").string() << "\n";
}

// ---- eval

struct EvalArgs {
  Common common;
  std::vector<std::string> models;
  std::string test, index;
};

std::string report_text(prectr_report* r, bool table) {
  char* text = nullptr;
  check(table ? prectr_report_table(r, &text) : prectr_report_metrics(r, &text));
  return take(text);
}

void cmd_eval(EvalArgs& a) {
  Run run("eval", a.common, load_config(a.common));
  run.prepare(false, false);
  std::vector<std::string> names;
  std::vector<Model> models;
  for (const auto& spec : a.models) {
    auto eq = spec.find('=');
    std::string name = eq == std::string::npos ? fs::path(spec).parent_path().filename().string() : spec.substr(0, eq);
    std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    if (name.empty()) name = fs::path(path).stem().string();
    names.push_back(name);
    models.push_back(read_model(run, path));
  }
  auto test = read_dataset(run, a.test);
  auto index = read_index(run, a.index);
  std::vector<const char*> name_ptrs;
  std::vector<const prectr_model*> model_ptrs;
  for (std::size_t i = 0; i < models.size(); ++i) {
    name_ptrs.push_back(names[i].c_str());
    model_ptrs.push_back(models[i].get());
  }
  prectr_report* raw = nullptr;
  check(prectr_compare(name_ptrs.data(), model_ptrs.data(), models.size(), test.get(), index.get(), &raw));
  Report report(raw);
  const auto table = report_text(report.get(), true);
  write_text(run.output("table.tsv"), table);
  write_text(run.output("metrics.tsv"), report_text(report.get(), false));
  run.finish();
  std::cout << table;
}

// ---- sweep

// Parses "<name>.<metric>\t<value>" lines.
std::map<std::string, std::map<std::string, std::string>> parse_metrics(const std::string& text) {
  std::map<std::string, std::map<std::string, std::string>> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const auto dot = line.rfind('.', tab);
    if (tab == std::string::npos || dot == std::string::npos) runtime_failure("malformed metrics line: " + line);
    out[line.substr(0, dot)][line.substr(dot + 1, tab - dot - 1)] = line.substr(tab + 1);
  }
  return out;
}

struct SweepArgs {
  Common common;
  Variant variant;
  std::string param;
  std::vector<double> values;
  std::string train, test, index;
};

void cmd_sweep(SweepArgs& a) {
  if (a.values.size() < 2) bad_input("a sweep needs at least two values");
  if (!std::is_sorted(a.values.begin(), a.values.end())) bad_input("sweep values must be in non-decreasing order");
  auto cfg = load_config(a.common);
  apply_variant(cfg.get(), a.variant);
  Run run("sweep " + a.param, a.common, std::move(cfg));
  run.prepare(false, false);
  auto train = read_dataset(run, a.train);
  auto test = read_dataset(run, a.test);
  auto index = read_index(run, a.index);

  const std::string key = "train." + a.param;
  std::string metrics_text;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    std::ostringstream v;
    v << a.values[i];
    set_key(run.config(), key, v.str());
    check(prectr_config_validate(run.config()));
    const std::string prefix = a.param + "-" + std::to_string(i) + ".";
    auto model = train_model(run, train.get(), index.get(), prefix);
    const std::string name = a.param + "=" + v.str();
    const char* name_ptr = name.c_str();
    const prectr_model* model_ptr = model.get();
    prectr_report* raw = nullptr;
    check(prectr_compare(&name_ptr, &model_ptr, 1, test.get(), index.get(), &raw));
    Report report(raw);
    metrics_text += report_text(report.get(), false);
    names.push_back(name);
    std::cerr << name << " done\n";
  }
  write_text(run.output("metrics.tsv"), metrics_text);

  // The series is rebuilt from the machine-readable metrics.
  auto parsed = parse_metrics(metrics_text);
  std::ostringstream series;
  series << a.param << "\tauc\tgauc\trelevance_score\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& m = parsed.at(names[i]);
    std::ostringstream v;
    v << a.values[i];
    series << v.str() << '\t' << m.at("auc") << '\t' << m.at("gauc") << '\t' << m.at("relevance_score") << '\n';
  }
  write_text(run.output("series.tsv"), series.str());
  run.finish();
  std::cout << series.str();
}

// ---- rank

struct RankArgs {
  Common common;
  std::string model, index, encoder, query, user_context, candidates;
  bool explain = false;
};

std::vector<std::string> tab_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

// Non-empty lines that do not start with '#'.
std::vector<std::string> content_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

std::uint64_t parse_id(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    bad_input(what + ": not an id: '" + s + "'");
  }
}

void cmd_rank(RankArgs& a) {
  Run run("rank", a.common, load_config(a.common));
  run.prepare(false, false);
  auto model = read_model(run, a.model);
  auto index = read_index(run, a.index);
  Encoder enc;
  if (!a.encoder.empty()) {
    enc = read_encoder(run, a.encoder);
    check(prectr_index_set_fallback(index.get(), enc.get()));
  }

  // user_id<TAB>id, then history<TAB>query<TAB>item_text lines, most recent first.
  std::uint64_t user_id = 0;
  std::vector<std::pair<std::string, std::string>> history;
  if (!a.user_context.empty()) {
    run.input(a.user_context);
    for (const auto& line : content_lines(read_text(a.user_context))) {
      auto f = tab_fields(line);
      if (f[0] == "user_id" && f.size() == 2) {
        user_id = parse_id(f[1], "user context");
      } else if (f[0] == "history" && f.size() == 3) {
        history.emplace_back(f[1], f[2]);
      } else {
        bad_input("user context: unexpected line '" + line + "'");
      }
    }
  }
  std::vector<prectr_history_entry> hist;
  for (const auto& [q, item] : history) hist.push_back({q.c_str(), item.c_str()});

  run.input(a.candidates);
  std::vector<std::pair<std::uint64_t, std::string>> cands;
  for (const auto& line : content_lines(read_text(a.candidates))) {
    auto f = tab_fields(line);
    if (f.size() != 2) bad_input("candidates: expected item_id<TAB>item_text, got '" + line + "'");
    cands.emplace_back(parse_id(f[0], "candidates"), f[1]);
  }
  std::vector<prectr_candidate> cand_ptrs;
  for (const auto& [id, text] : cands) cand_ptrs.push_back({id, text.c_str()});

  prectr_ranking* raw = nullptr;
  check(prectr_rank(model.get(), index.get(), user_id, a.query.c_str(), hist.data(), hist.size(), cand_ptrs.data(),
                    cand_ptrs.size(), &raw));
  Ranking ranking(raw);
  std::size_t n = 0;
  check(prectr_ranking_size(ranking.get(), &n));
  std::ostringstream out;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t id = 0;
    const char* text = nullptr;
    double score = 0.0;
    check(prectr_ranking_item(ranking.get(), i, &id, &text, &score));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", score);
    out << (i + 1) << '\t' << id << '\t' << text << '\t' << buf;
    if (a.explain) {
      char* line = nullptr;
      check(prectr_ranking_explain(ranking.get(), i, &line));
      out << '\t' << take(line);
    }
    out << '\n';
  }
  write_text(run.output("ranking.tsv"), out.str());
  run.finish();
  std::cout << out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relevance-constrained CTR prediction pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", prectr_version());

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic corpus and its splits");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--n-impressions", gen.n_impressions, "Number of impressions");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_flag("--force", gen.force, "Write into a non-empty output directory");

  EncoderArgs enc;
  auto* enc_cmd = app.add_subcommand("encoder", "Train the text encoder and build the embedding index");
  enc_cmd->require_subcommand(1);
  auto* pre_cmd = enc_cmd->add_subcommand("pretrain", "Pretrain on click feedback");
  add_common(pre_cmd, enc.common);
  pre_cmd->add_option("--train", enc.train, "Training split")->required();
  auto* fine_cmd = enc_cmd->add_subcommand("finetune", "Fine-tune on relevance levels");
  add_common(fine_cmd, enc.common);
  fine_cmd->add_option("--encoder", enc.encoder, "Pretrained encoder checkpoint")->required();
  fine_cmd->add_option("--train", enc.train, "Training split")->required();
  auto* idx_cmd = enc_cmd->add_subcommand("build-index", "Precompute text and pair embeddings");
  add_common(idx_cmd, enc.common);
  idx_cmd->add_option("--encoder", enc.encoder, "Encoder checkpoint")->required();
  idx_cmd->add_option("--data", enc.data, "Dataset files to cover; repeatable")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Two-stage model training");
  add_common(train_cmd, tr.common);
  add_variant_flags(train_cmd, tr.variant);
  train_cmd->add_option("--train", tr.train, "Training split")->required();
  train_cmd->add_option("--index", tr.index, "Embedding index")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Compare trained models on a test split");
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--model", ev.models, "[name=]checkpoint; the first is the baseline")->required();
  eval_cmd->add_option("--test", ev.test, "Test split")->required();
  eval_cmd->add_option("--index", ev.index, "Embedding index")->required();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a hyperparameter series");
  add_common(sweep_cmd, sw.common);
  add_variant_flags(sweep_cmd, sw.variant);
  sweep_cmd->add_option("param", sw.param, "alpha or gamma")->required()->check(CLI::IsMember({"alpha", "gamma"}));
  sweep_cmd->add_option("--values", sw.values, "Values in non-decreasing order")->required()->delimiter(',');
  sweep_cmd->add_option("--train", sw.train, "Training split")->required();
  sweep_cmd->add_option("--test", sw.test, "Evaluation split")->required();
  sweep_cmd->add_option("--index", sw.index, "Embedding index")->required();

  RankArgs rk;
  auto* rank_cmd = app.add_subcommand("rank", "Rank candidate items for one user and query");
  add_common(rank_cmd, rk.common);
  rank_cmd->add_option("--model", rk.model, "Model checkpoint")->required();
  rank_cmd->add_option("--index", rk.index, "Embedding index")->required();
  rank_cmd->add_option("--encoder", rk.encoder, "Encoder for texts missing from the index");
  rank_cmd->add_option("--query", rk.query, "Query text")->required();
  rank_cmd->add_option("--user-context", rk.user_context, "user_id and click history file");
  rank_cmd->add_option("--candidates", rk.candidates, "item_id<TAB>item_text per line")->required();
  rank_cmd->add_flag("--explain", rk.explain, "Append the score breakdown to every line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) cmd_gen_data(gen);
    else if (pre_cmd->parsed()) cmd_encoder_pretrain(enc);
    else if (fine_cmd->parsed()) cmd_encoder_finetune(enc);
    else if (idx_cmd->parsed()) cmd_encoder_build_index(enc);
    else if (train_cmd->parsed()) cmd_train(tr);
    else if (eval_cmd->parsed()) cmd_eval(ev);
    else if (sweep_cmd->parsed()) cmd_sweep(sw);
    else if (rank_cmd->parsed()) cmd_rank(rk);
  } catch (const Failure& f) {
    std::cerr << "prectr: " << f.message << "\n";
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "prectr: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
