#pragma once

// Run configuration. Every section is optional; unknown keys are rejected.
// Relative paths resolve against the directory of the config file.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "activelabel/active_loop.hpp"
#include "activelabel/checkpoint.hpp"
#include "activelabel/corpus.hpp"
#include "activelabel/embedding.hpp"
#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"
#include "activelabel/metrics.hpp"
#include "activelabel/training.hpp"

namespace activelabel {

inline void to_json(nlohmann::json& j, const Taxonomy& t) {
  j = nlohmann::json{{"aspects", t.aspects}, {"sentiment", t.sentiment}};
}

inline void from_json(const nlohmann::json& j, Taxonomy& t) {
  detail::reject_unknown_keys(j, {"aspects", "sentiment"}, "taxonomy");
  t.aspects = j.at("aspects").get<std::vector<std::string>>();
  t.sentiment = j.at("sentiment").get<std::vector<std::string>>();
  t.validate();
}

inline std::string_view embedding_mode_name(EmbeddingMode mode) {
  return mode == EmbeddingMode::Trainable ? "self_trained" : "pretrained";
}

inline EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "pretrained") return EmbeddingMode::FrozenPretrained;
  if (name == "self_trained") return EmbeddingMode::Trainable;
  throw Error(ErrorCode::ConfigError, "embedding mode must be \"pretrained\" or \"self_trained\"");
}

struct SelectionConfig {
  std::string strategy = "uncertainty";
  Task driver_task = Task::Aspect;
  std::size_t k = 50;
  std::size_t init_size = 50;
};

struct EmbeddingConfig {
  EmbeddingMode mode = EmbeddingMode::FrozenPretrained;
  std::string path;  // word2vec text file; empty means seeded random vectors
  int dim = 32;      // used only without a file
  std::size_t min_count = 1;
  std::size_t max_seq_len = kDefaultMaxSeqLen;
};

struct ServiceConfig {
  int lease_minutes = 15;
  std::size_t auto_retrain_every = 0;  // 0 disables automatic retraining
};

struct ExperimentFiles {
  std::string corpus;      // JSONL; rows split by their `split` field
  std::string validation;  // optional separate validation JSONL
  std::vector<ExperimentSetting> settings;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t rounds = 20;
  std::vector<Task> tasks{Task::Aspect, Task::Sentiment};
  unsigned threads = 1;
};

struct Config {
  std::uint64_t seed = 1;
  Hyperparams hyper;
  Taxonomy taxonomy = Taxonomy::reviews();
  double threshold = kDefaultThreshold;
  bool force_top1 = false;
  SelectionConfig selection;
  EmbeddingConfig embedding;
  ServiceConfig service;
  ExperimentFiles experiment;

  void validate() const {
    hyper.validate();
    taxonomy.validate();
    if (!(threshold > 0 && threshold < 1)) throw Error(ErrorCode::ConfigError, "threshold must lie in (0, 1)");
    make_strategy(selection.strategy);
    if (selection.k == 0 || selection.init_size == 0)
      throw Error(ErrorCode::ConfigError, "selection k and init_size must be positive");
    if (embedding.dim <= 0 || embedding.max_seq_len == 0 || embedding.min_count == 0)
      throw Error(ErrorCode::ConfigError, "embedding dim, min_count and max_seq_len must be positive");
    if (service.lease_minutes <= 0) throw Error(ErrorCode::ConfigError, "lease_minutes must be positive");
  }
};

namespace detail {

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (base / p).lexically_normal().string();
}

inline std::vector<std::string> task_names(const std::vector<Task>& tasks) {
  std::vector<std::string> out;
  for (Task t : tasks) out.emplace_back(to_string(t));
  return out;
}

}  // namespace detail

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json settings = nlohmann::json::array();
  for (const auto& s : c.experiment.settings)
    settings.push_back({{"name", s.name}, {"embedding", embedding_mode_name(s.embedding)}, {"strategy", s.strategy}});
  return {
      {"seed", c.seed},
      {"hyper", c.hyper},
      {"taxonomy", c.taxonomy},
      {"threshold", c.threshold},
      {"force_top1", c.force_top1},
      {"selection",
       {{"strategy", c.selection.strategy},
        {"driver_task", to_string(c.selection.driver_task)},
        {"k", c.selection.k},
        {"init_size", c.selection.init_size}}},
      {"embedding",
       {{"mode", embedding_mode_name(c.embedding.mode)},
        {"path", c.embedding.path},
        {"dim", c.embedding.dim},
        {"min_count", c.embedding.min_count},
        {"max_seq_len", c.embedding.max_seq_len}}},
      {"service", {{"lease_minutes", c.service.lease_minutes}, {"auto_retrain_every", c.service.auto_retrain_every}}},
      {"experiment",
       {{"corpus", c.experiment.corpus},
        {"validation", c.experiment.validation},
        {"settings", settings},
        {"seeds", c.experiment.seeds},
        {"rounds", c.experiment.rounds},
        {"tasks", detail::task_names(c.experiment.tasks)},
        {"threads", c.experiment.threads}}},
  };
}

/// Throws ConfigError on unknown keys, wrong types or invalid values.
inline Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  Config c;
  try {
    detail::reject_unknown_keys(
        j, {"seed", "hyper", "taxonomy", "threshold", "force_top1", "selection", "embedding", "service", "experiment"},
        "config");
    c.seed = j.value("seed", c.seed);
    if (j.contains("hyper")) c.hyper = j.at("hyper").get<Hyperparams>();
    if (j.contains("taxonomy")) c.taxonomy = j.at("taxonomy").get<Taxonomy>();
    c.threshold = j.value("threshold", c.threshold);
    c.force_top1 = j.value("force_top1", c.force_top1);
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      detail::reject_unknown_keys(s, {"strategy", "driver_task", "k", "init_size"}, "selection");
      c.selection.strategy = s.value("strategy", c.selection.strategy);
      if (s.contains("driver_task")) c.selection.driver_task = parse_task(s.at("driver_task").get<std::string>());
      c.selection.k = s.value("k", c.selection.k);
      c.selection.init_size = s.value("init_size", c.selection.init_size);
    }
    if (j.contains("embedding")) {
      const auto& e = j.at("embedding");
      detail::reject_unknown_keys(e, {"mode", "path", "dim", "min_count", "max_seq_len"}, "embedding");
      if (e.contains("mode")) c.embedding.mode = parse_embedding_mode(e.at("mode").get<std::string>());
      c.embedding.path = detail::resolve_path(e.value("path", c.embedding.path), base_dir);
      c.embedding.dim = e.value("dim", c.embedding.dim);
      c.embedding.min_count = e.value("min_count", c.embedding.min_count);
      c.embedding.max_seq_len = e.value("max_seq_len", c.embedding.max_seq_len);
    }
    if (j.contains("service")) {
      const auto& s = j.at("service");
      detail::reject_unknown_keys(s, {"lease_minutes", "auto_retrain_every"}, "service");
      c.service.lease_minutes = s.value("lease_minutes", c.service.lease_minutes);
      c.service.auto_retrain_every = s.value("auto_retrain_every", c.service.auto_retrain_every);
    }
    if (j.contains("experiment")) {
      const auto& x = j.at("experiment");
      detail::reject_unknown_keys(x, {"corpus", "validation", "settings", "seeds", "rounds", "tasks", "threads"},
                                  "experiment");
      c.experiment.corpus = detail::resolve_path(x.value("corpus", c.experiment.corpus), base_dir);
      c.experiment.validation = detail::resolve_path(x.value("validation", c.experiment.validation), base_dir);
      if (x.contains("settings")) {
        c.experiment.settings.clear();
        for (const auto& s : x.at("settings")) {
          detail::reject_unknown_keys(s, {"name", "embedding", "strategy"}, "experiment setting");
          ExperimentSetting setting;
          setting.embedding = parse_embedding_mode(s.value("embedding", std::string("pretrained")));
          setting.strategy = s.value("strategy", setting.strategy);
          setting.name = s.value("name", setting.strategy + "_" + std::string(embedding_mode_name(setting.embedding)));
          c.experiment.settings.push_back(std::move(setting));
        }
      }
      c.experiment.seeds = x.value("seeds", c.experiment.seeds);
      c.experiment.rounds = x.value("rounds", c.experiment.rounds);
      if (x.contains("tasks")) {
        c.experiment.tasks.clear();
        for (const auto& t : x.at("tasks")) c.experiment.tasks.push_back(parse_task(t.get<std::string>()));
      }
      c.experiment.threads = x.value("threads", c.experiment.threads);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  c.validate();
  return c;
}

inline Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, std::string("invalid JSON in ") + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline ExperimentConfig experiment_config(const Config& c) {
  ExperimentConfig x;
  x.settings = c.experiment.settings;
  x.seeds = c.experiment.seeds;
  x.init_size = c.selection.init_size;
  x.k = c.selection.k;
  x.rounds = c.experiment.rounds;
  x.tasks = c.experiment.tasks;
  x.driver_task = c.selection.driver_task;
  x.hyper = c.hyper;
  x.hyper.seed = mix_seed(c.hyper.seed, c.seed);
  x.threshold = c.threshold;
  x.force_top1 = c.force_top1;
  x.threads = c.experiment.threads;
  return x;
}

inline std::vector<Document> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open corpus " + path);
  try {
    return read_corpus(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.detail(), e.line());
  }
}

/// Embedding table for `vocab` per the config: the pretrained file when one
/// is named, otherwise seeded random vectors.
inline EmbeddingTable config_embedding(const Config& c, const Vocabulary& vocab) {
  if (c.embedding.path.empty()) {
    auto table = random_embedding(vocab.size(), c.embedding.dim, mix_seed(c.seed, 0xE3B));
    table.mode = c.embedding.mode;
    return table;
  }
  std::ifstream in(c.embedding.path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open embeddings " + c.embedding.path);
  auto table = load_pretrained(in, vocab, mix_seed(c.seed, 0xE3C));
  table.mode = c.embedding.mode;
  return table;
}

/// Loads the corpus and embeddings named by the config for a simulation.
inline ExperimentData load_experiment_data(const Config& c) {
  if (c.experiment.corpus.empty()) throw Error(ErrorCode::ConfigError, "experiment.corpus is not set");
  const auto docs = read_corpus_file(c.experiment.corpus);
  for (const auto& d : docs) {
    d.labels(c.taxonomy, Task::Aspect);
    d.labels(c.taxonomy, Task::Sentiment);
  }
  Pool pool;
  if (c.experiment.validation.empty()) {
    pool = make_simulation_pool(docs, c.taxonomy, c.embedding.max_seq_len);
  } else {
    const auto validation = read_corpus_file(c.experiment.validation);
    pool = make_simulation_pool(docs, validation, c.taxonomy, c.embedding.max_seq_len);
  }
  bool needs_file = false;
  for (const auto& s : c.experiment.settings) needs_file = needs_file || s.embedding == EmbeddingMode::FrozenPretrained;
  if (needs_file && c.embedding.path.empty())
    throw Error(ErrorCode::ConfigError, "pretrained settings need embedding.path");
  return prepare_experiment(
      std::move(pool), [&](const Vocabulary& v) { return config_embedding(c, v); }, c.seed, c.embedding.min_count,
      c.embedding.max_seq_len);
}

/// Protocol for the synthetic benchmark written by `synth`: three arms over
/// three seeds, aspect task only, ten rounds of 50 from an initial 50.
inline Config synthetic_benchmark_config(const std::string& corpus, const std::string& embeddings) {
  Config c;
  c.hyper.hidden = 32;
  c.hyper.learning_rate = 5e-3;
  c.hyper.epochs = 120;
  c.hyper.batch_size = 8;
  c.embedding.path = embeddings;
  c.experiment.corpus = corpus;
  c.experiment.settings = {{"uncertainty_pretrained", EmbeddingMode::FrozenPretrained, "uncertainty"},
                           {"random_pretrained", EmbeddingMode::FrozenPretrained, "random"},
                           {"random_self_trained", EmbeddingMode::Trainable, "random"}};
  c.experiment.rounds = 10;
  c.experiment.tasks = {Task::Aspect};
  return c;
}

}  // namespace activelabel
