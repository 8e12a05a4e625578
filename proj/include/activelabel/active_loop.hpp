#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "activelabel/corpus.hpp"
#include "activelabel/embedding.hpp"
#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"
#include "activelabel/metrics.hpp"
#include "activelabel/random.hpp"
#include "activelabel/tokenizer.hpp"
#include "activelabel/training.hpp"
#include "activelabel/vocabulary.hpp"

namespace activelabel {

struct TaskLabels {
  LabelVector aspect;
  LabelVector sentiment;

  const LabelVector& get(Task task) const { return task == Task::Aspect ? aspect : sentiment; }
  bool operator==(const TaskLabels&) const = default;
};

struct LabeledDoc {
  TokenSequence tokens;
  TaskLabels labels;

  bool operator==(const LabeledDoc&) const = default;
};

/// Documents keyed by id. Ordered maps make every iteration deterministic.
struct Pool {
  std::map<std::string, LabeledDoc> labeled;
  std::map<std::string, TokenSequence> unlabeled;
  std::map<std::string, TokenSequence> pending;  // selected in live mode, awaiting labels
  std::map<std::string, LabeledDoc> validation;
  std::optional<std::map<std::string, TaskLabels>> hidden_oracle;

  std::size_t trainable_size() const { return labeled.size() + unlabeled.size() + pending.size(); }

  /// Throws ConfigError when an id appears in more than one partition.
  void check_disjoint() const {
    std::set<std::string> seen;
    auto add = [&](const std::string& id, const char* where) {
      if (!seen.insert(id).second) throw Error(ErrorCode::ConfigError, "id '" + id + "' repeated in " + where);
    };
    for (const auto& [id, _] : labeled) add(id, "labeled pool");
    for (const auto& [id, _] : unlabeled) add(id, "unlabeled pool");
    for (const auto& [id, _] : pending) add(id, "pending pool");
    for (const auto& [id, _] : validation) add(id, "validation set");
  }

  bool operator==(const Pool&) const = default;
};

/// Builds a simulation pool: train rows become unlabeled with their labels
/// hidden in the oracle, validation rows are held out.
inline Pool make_simulation_pool(std::span<const Document> train_docs, std::span<const Document> validation_docs,
                                 const Taxonomy& taxonomy, std::size_t max_seq_len = kDefaultMaxSeqLen) {
  Pool pool;
  pool.hidden_oracle.emplace();
  for (const auto& doc : validation_docs) {
    if (!doc.labeled()) throw Error(ErrorCode::ConfigError, "validation document '" + doc.id + "' has no labels");
    LabeledDoc entry{tokenize(doc.text, max_seq_len, doc.id),
                     {doc.labels(taxonomy, Task::Aspect), doc.labels(taxonomy, Task::Sentiment)}};
    if (!pool.validation.emplace(doc.id, std::move(entry)).second)
      throw Error(ErrorCode::ConfigError, "duplicate validation id '" + doc.id + "'");
  }
  for (const auto& doc : train_docs) {
    if (pool.validation.count(doc.id))
      throw Error(ErrorCode::ConfigError, "document '" + doc.id + "' is in both the pool and the validation set");
    if (!doc.labeled()) throw Error(ErrorCode::ConfigError, "simulation needs labels for '" + doc.id + "'");
    if (!pool.unlabeled.emplace(doc.id, tokenize(doc.text, max_seq_len, doc.id)).second)
      throw Error(ErrorCode::ConfigError, "duplicate pool id '" + doc.id + "'");
    pool.hidden_oracle->emplace(doc.id,
                                TaskLabels{doc.labels(taxonomy, Task::Aspect), doc.labels(taxonomy, Task::Sentiment)});
  }
  return pool;
}

/// Splits a corpus by its `split` field.
inline Pool make_simulation_pool(std::span<const Document> docs, const Taxonomy& taxonomy,
                                 std::size_t max_seq_len = kDefaultMaxSeqLen) {
  std::vector<Document> train, validation;
  for (const auto& doc : docs) (doc.split == Split::Validation ? validation : train).push_back(doc);
  return make_simulation_pool(train, validation, taxonomy, max_seq_len);
}

// ---------------------------------------------------------------------------
// Selection

/// 1 - max_i pred_i.
inline double uncertainty_score(std::span<const double> pred) {
  if (pred.empty()) throw Error(ErrorCode::ShapeError, "uncertainty of an empty prediction");
  return 1.0 - *std::max_element(pred.begin(), pred.end());
}

/// Indices of the k highest scores; ties go to the smaller index. Callers pass
/// ids in ascending order so index order is id order.
inline std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  k = std::min(k, order.size());
  auto better = [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  order.resize(k);
  return order;
}

/// Predictions for the given unlabeled ids under the driver task's model.
using Predictor = std::function<std::vector<PredictionVector>(std::span<const std::string> ids)>;

struct StrategySpec {
  std::string kind = "uncertainty";
  Task driver_task = Task::Aspect;
  std::uint64_t seed = 0;

  bool operator==(const StrategySpec&) const = default;
};

class SelectionStrategy {
 public:
  virtual ~SelectionStrategy() = default;
  virtual bool needs_model() const = 0;
  /// `ids` is sorted and non-empty; 1 <= k <= ids.size().
  virtual std::vector<std::string> select(std::span<const std::string> ids, const Predictor& predict, std::size_t k,
                                          std::uint64_t seed) const = 0;
};

class UncertaintyStrategy final : public SelectionStrategy {
 public:
  bool needs_model() const override { return true; }
  std::vector<std::string> select(std::span<const std::string> ids, const Predictor& predict, std::size_t k,
                                  std::uint64_t) const override {
    const auto preds = predict(ids);
    std::vector<double> scores;
    scores.reserve(preds.size());
    for (const auto& p : preds) scores.push_back(uncertainty_score(p));
    std::vector<std::string> out;
    for (auto i : top_k_indices(scores, k)) out.push_back(ids[i]);
    return out;
  }
};

class RandomStrategy final : public SelectionStrategy {
 public:
  bool needs_model() const override { return false; }
  std::vector<std::string> select(std::span<const std::string> ids, const Predictor&, std::size_t k,
                                  std::uint64_t seed) const override {
    std::vector<std::string> all(ids.begin(), ids.end());
    Rng rng(seed);
    // Partial Fisher-Yates: the first k slots are a uniform sample.
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    all.resize(k);
    return all;
  }
};

using StrategyFactory = std::function<std::unique_ptr<SelectionStrategy>()>;

inline std::map<std::string, StrategyFactory>& strategy_registry() {
  static std::map<std::string, StrategyFactory> registry{
      {"uncertainty", [] { return std::make_unique<UncertaintyStrategy>(); }},
      {"random", [] { return std::make_unique<RandomStrategy>(); }},
  };
  return registry;
}

inline void register_strategy(const std::string& kind, StrategyFactory factory) {
  strategy_registry()[kind] = std::move(factory);
}

inline std::unique_ptr<SelectionStrategy> make_strategy(const std::string& kind) {
  const auto& registry = strategy_registry();
  const auto it = registry.find(kind);
  if (it == registry.end()) throw Error(ErrorCode::ConfigError, "unknown selection strategy '" + kind + "'");
  return it->second();
}

/// Picks up to k ids from the unlabeled pool. The selection seed for round r
/// is derived from the strategy seed and r.
inline std::vector<std::string> select_batch(const StrategySpec& spec, const Predictor& predict, const Pool& pool,
                                             std::size_t k, std::size_t round = 0) {
  if (k == 0) throw Error(ErrorCode::ConfigError, "query size k must be at least 1");
  if (pool.unlabeled.empty()) throw Error(ErrorCode::PoolExhausted, "no unlabeled documents remain");
  const auto strategy = make_strategy(spec.kind);
  std::vector<std::string> ids;
  ids.reserve(pool.unlabeled.size());
  for (const auto& [id, _] : pool.unlabeled) ids.push_back(id);
  return strategy->select(ids, predict, std::min(k, ids.size()), mix_seed(spec.seed, round));
}

// ---------------------------------------------------------------------------
// Rounds

using TaskModels = std::map<Task, Classifier<float>>;

struct Round {
  std::size_t index = 0;
  std::size_t labeled_count = 0;  // examples the evaluated models were trained on
  std::size_t labeled_count_after = 0;
  std::vector<std::string> selected_ids;
  std::map<Task, EvalReport> eval;

  bool operator==(const Round&) const = default;
};

struct LoopSettings {
  Hyperparams hyper;
  StrategySpec strategy;
  std::size_t k = 50;
  std::vector<Task> tasks{Task::Aspect, Task::Sentiment};
  double threshold = kDefaultThreshold;
  bool force_top1 = false;
  bool simulate = true;  // oracle labels selected ids; otherwise they become pending
};

/// Training seed for one task model.
inline Hyperparams task_hyperparams(const Hyperparams& hyper, Task task) {
  Hyperparams h = hyper;
  h.seed = mix_seed(hyper.seed, task_index(task));
  return h;
}

/// Fresh models for each task on the whole labeled pool.
inline TaskModels train_models(const Pool& pool, const LoopSettings& settings, const EmbeddingContext<float>& ctx) {
  if (pool.labeled.empty()) throw Error(ErrorCode::EmptyPool, "labeled pool is empty");
  TaskModels models;
  for (Task task : settings.tasks) {
    std::vector<TokenExample> data;
    data.reserve(pool.labeled.size());
    for (const auto& [id, doc] : pool.labeled) data.push_back({ctx.vocab->encode(doc.tokens), doc.labels.get(task)});
    models.emplace(task, train_classifier<float>(data, task_hyperparams(settings.hyper, task), ctx));
  }
  return models;
}

inline std::vector<PredictionVector> predict_sequences(const Classifier<float>& model,
                                                       const std::vector<const TokenSequence*>& seqs) {
  std::vector<std::vector<TokenId>> ids;
  ids.reserve(seqs.size());
  for (const auto* s : seqs) ids.push_back(model.vocab->encode(*s));
  return model.predict(std::span<const std::vector<TokenId>>(ids));
}

inline std::map<Task, EvalReport> evaluate_models(const TaskModels& models, const Pool& pool, double threshold,
                                                  bool force_top1) {
  std::map<Task, EvalReport> out;
  std::vector<const TokenSequence*> seqs;
  for (const auto& [id, doc] : pool.validation) seqs.push_back(&doc.tokens);
  for (const auto& [task, model] : models) {
    const auto preds = predict_sequences(model, seqs);
    std::vector<LabelVector> golds;
    golds.reserve(pool.validation.size());
    for (const auto& [id, doc] : pool.validation) golds.push_back(doc.labels.get(task));
    out.emplace(task, evaluate(preds, golds, threshold, force_top1));
  }
  return out;
}

/// Predictor over the pool's unlabeled documents.
inline Predictor pool_predictor(const Classifier<float>& model, const Pool& pool) {
  return [&model, &pool](std::span<const std::string> ids) {
    std::vector<const TokenSequence*> seqs;
    seqs.reserve(ids.size());
    for (const auto& id : ids) seqs.push_back(&pool.unlabeled.at(id));
    return predict_sequences(model, seqs);
  };
}

/// Moves selected ids out of the unlabeled pool: into labeled with oracle
/// labels when simulating, otherwise into pending.
inline void apply_selection(Pool& pool, std::span<const std::string> ids, bool simulate) {
  if (simulate && !pool.hidden_oracle) throw Error(ErrorCode::ConfigError, "simulation requires oracle labels");
  for (const auto& id : ids) {
    auto node = pool.unlabeled.extract(id);
    if (node.empty()) throw Error(ErrorCode::NotFound, "'" + id + "' is not unlabeled");
    if (simulate) {
      pool.labeled.emplace(id, LabeledDoc{std::move(node.mapped()), pool.hidden_oracle->at(id)});
    } else {
      pool.pending.emplace(id, std::move(node.mapped()));
    }
  }
}

struct RoundResult {
  Round round;
  TaskModels models;
};

/// Train on the labeled pool, evaluate on validation, then select k ids.
inline RoundResult run_round(Pool& pool, const LoopSettings& settings, const EmbeddingContext<float>& ctx,
                             std::size_t index) {
  if (pool.unlabeled.empty()) throw Error(ErrorCode::PoolExhausted, "no unlabeled documents remain");
  if (settings.strategy.kind == "uncertainty" &&
      std::find(settings.tasks.begin(), settings.tasks.end(), settings.strategy.driver_task) == settings.tasks.end())
    throw Error(ErrorCode::ConfigError, "driver task is not among the trained tasks");
  RoundResult result;
  result.models = train_models(pool, settings, ctx);
  result.round.index = index;
  result.round.labeled_count = pool.labeled.size();
  result.round.eval = evaluate_models(result.models, pool, settings.threshold, settings.force_top1);

  Predictor predict;
  if (const auto it = result.models.find(settings.strategy.driver_task); it != result.models.end())
    predict = pool_predictor(it->second, pool);
  result.round.selected_ids = select_batch(settings.strategy, predict, pool, settings.k, index);
  apply_selection(pool, result.round.selected_ids, settings.simulate);
  result.round.labeled_count_after = pool.labeled.size() + pool.pending.size();
  return result;
}

// ---------------------------------------------------------------------------
// Experiments and learning curves

struct CurvePoint {
  std::size_t round = 0;
  std::size_t labeled_count = 0;
  std::map<Task, EvalReport> eval;

  bool operator==(const CurvePoint&) const = default;
};

struct LearningCurve {
  std::string setting;
  std::optional<std::uint64_t> seed;  // empty for the seed mean
  std::vector<CurvePoint> points;

  bool operator==(const LearningCurve&) const = default;
};

struct ExperimentSetting {
  std::string name;
  EmbeddingMode embedding = EmbeddingMode::FrozenPretrained;
  std::string strategy = "uncertainty";

  bool operator==(const ExperimentSetting&) const = default;
};

struct ExperimentConfig {
  std::vector<ExperimentSetting> settings;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t init_size = 50;
  std::size_t k = 50;
  std::size_t rounds = 20;
  std::vector<Task> tasks{Task::Aspect, Task::Sentiment};
  Task driver_task = Task::Aspect;
  Hyperparams hyper;
  double threshold = kDefaultThreshold;
  bool force_top1 = false;
  unsigned threads = 1;

  void validate() const {
    if (settings.empty()) throw Error(ErrorCode::ConfigError, "experiment lists no settings");
    if (seeds.empty()) throw Error(ErrorCode::ConfigError, "experiment lists no seeds");
    if (init_size == 0 || k == 0 || rounds == 0)
      throw Error(ErrorCode::ConfigError, "init_size, k and rounds must be positive");
    if (tasks.empty()) throw Error(ErrorCode::ConfigError, "experiment lists no tasks");
    std::set<std::string> names;
    for (const auto& s : settings) {
      if (!names.insert(s.name).second) throw Error(ErrorCode::ConfigError, "duplicate setting '" + s.name + "'");
      make_strategy(s.strategy);
    }
    hyper.validate();
  }
};

/// Inputs shared by every arm.
struct ExperimentData {
  Pool pool;  // everything unlabeled, oracle attached, validation held out
  std::shared_ptr<const Vocabulary> vocab;
  EmbeddingTable pretrained;    // frozen
  EmbeddingTable self_trained;  // trainable initial table
  std::size_t max_seq_len = kDefaultMaxSeqLen;
};

/// Vocabulary from the pool text, the pretrained table read against it, and a
/// seeded trainable table of the same width.
inline ExperimentData prepare_experiment(Pool pool, const std::function<EmbeddingTable(const Vocabulary&)>& load_table,
                                         std::uint64_t seed, std::size_t min_count = 1,
                                         std::size_t max_seq_len = kDefaultMaxSeqLen) {
  pool.check_disjoint();
  std::vector<TokenSequence> texts;
  for (const auto& [id, seq] : pool.unlabeled) texts.push_back(seq);
  for (const auto& [id, doc] : pool.labeled) texts.push_back(doc.tokens);
  ExperimentData data;
  data.vocab = std::make_shared<const Vocabulary>(build_vocabulary(texts, min_count));
  data.pretrained = load_table(*data.vocab);
  data.pretrained.mode = EmbeddingMode::FrozenPretrained;
  data.self_trained = random_embedding(data.vocab->size(), data.pretrained.dim(), mix_seed(seed, 0xE3B));
  data.pool = std::move(pool);
  data.max_seq_len = max_seq_len;
  return data;
}

/// Seeded initial labeled set: one document per aspect class where possible,
/// then a uniform fill up to `size`.
inline std::vector<std::string> initial_draw(const Pool& pool, std::size_t size, std::uint64_t seed) {
  if (!pool.hidden_oracle) throw Error(ErrorCode::ConfigError, "initial draw requires oracle labels");
  std::vector<std::string> ids;
  for (const auto& [id, _] : pool.unlabeled) ids.push_back(id);
  size = std::min(size, ids.size());
  Rng rng(mix_seed(seed, 0x1417));
  std::set<std::string> chosen;
  std::vector<std::string> out;
  const std::size_t classes = ids.empty() ? 0 : pool.hidden_oracle->at(ids.front()).aspect.size();
  for (std::size_t c = 0; c < classes && out.size() < size; ++c) {
    std::vector<std::string> candidates;
    for (const auto& id : ids)
      if (pool.hidden_oracle->at(id).aspect[c] && !chosen.count(id)) candidates.push_back(id);
    if (candidates.empty()) continue;
    const auto& pick = candidates[rng.below(candidates.size())];
    chosen.insert(pick);
    out.push_back(pick);
  }
  std::vector<std::string> rest;
  for (const auto& id : ids)
    if (!chosen.count(id)) rest.push_back(id);
  rng.shuffle(rest);
  for (std::size_t i = 0; out.size() < size; ++i) out.push_back(rest[i]);
  return out;
}

/// One (setting, seed) arm. Arms with the same seed share the initial draw
/// and, for random selection, every queried batch.
inline LearningCurve run_arm(const ExperimentData& data, const ExperimentConfig& config,
                             const ExperimentSetting& setting, std::uint64_t seed) {
  Pool pool = data.pool;
  apply_selection(pool, initial_draw(pool, config.init_size, seed), true);

  const auto& table = setting.embedding == EmbeddingMode::Trainable ? data.self_trained : data.pretrained;
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, table, data.max_seq_len);
  LoopSettings settings;
  settings.hyper = config.hyper;
  settings.hyper.seed = mix_seed(config.hyper.seed, seed);
  settings.strategy = {setting.strategy, config.driver_task, mix_seed(seed, 0x5E1EC7)};
  settings.k = config.k;
  settings.tasks = config.tasks;
  settings.threshold = config.threshold;
  settings.force_top1 = config.force_top1;

  LearningCurve curve{setting.name, seed, {}};
  for (std::size_t r = 0; r < config.rounds; ++r) {
    const auto result = run_round(pool, settings, ctx, r);
    curve.points.push_back({r, result.round.labeled_count, result.round.eval});
  }
  return curve;
}

/// Point-wise mean of precision, recall and F1 over seeds. Counts are summed.
inline LearningCurve mean_curve(std::span<const LearningCurve> curves) {
  if (curves.empty()) throw Error(ErrorCode::ConfigError, "no curves to average");
  LearningCurve mean{curves.front().setting, std::nullopt, curves.front().points};
  const auto n = static_cast<double>(curves.size());
  for (std::size_t i = 0; i < mean.points.size(); ++i) {
    for (auto& [task, report] : mean.points[i].eval) {
      report = EvalReport{};
      for (const auto& c : curves) {
        if (c.points.size() != mean.points.size() || c.points[i].labeled_count != mean.points[i].labeled_count)
          throw Error(ErrorCode::ShapeError, "curves disagree on labeled counts");
        const auto& r = c.points[i].eval.at(task);
        report.micro_precision += r.micro_precision / n;
        report.micro_recall += r.micro_recall / n;
        report.micro_f1 += r.micro_f1 / n;
        report.totals += r.totals;
        report.n_samples += r.n_samples;
      }
    }
  }
  return mean;
}

/// Per setting, in config order: one curve per seed, then the seed mean.
inline std::vector<LearningCurve> run_experiment(const ExperimentData& data, const ExperimentConfig& config) {
  config.validate();
  data.pool.check_disjoint();
  const std::size_t n_seeds = config.seeds.size();
  const std::size_t arms = config.settings.size() * n_seeds;
  std::vector<std::optional<LearningCurve>> results(arms);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t a; (a = next.fetch_add(1)) < arms;) {
      try {
        results[a] = run_arm(data, config, config.settings[a / n_seeds], config.seeds[a % n_seeds]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(arms)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<LearningCurve> out;
  for (std::size_t s = 0; s < config.settings.size(); ++s) {
    std::vector<LearningCurve> per_seed;
    for (std::size_t i = 0; i < n_seeds; ++i) per_seed.push_back(std::move(*results[s * n_seeds + i]));
    const auto mean = mean_curve(per_seed);
    out.insert(out.end(), per_seed.begin(), per_seed.end());
    out.push_back(mean);
  }
  return out;
}

inline constexpr const char* kCurveCsvHeader =
    "setting,task,seed,round,labeled_count,micro_precision,micro_recall,micro_f1";

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Rows ordered by setting (first appearance), task, seed (mean last), round.
inline void write_curves_csv(std::ostream& out, std::span<const LearningCurve> curves) {
  out << kCurveCsvHeader << '\n';
  std::vector<std::string> settings;
  for (const auto& c : curves)
    if (std::find(settings.begin(), settings.end(), c.setting) == settings.end()) settings.push_back(c.setting);
  for (const auto& setting : settings) {
    std::set<Task> tasks;
    for (const auto& c : curves)
      if (c.setting == setting)
        for (const auto& p : c.points)
          for (const auto& [task, _] : p.eval) tasks.insert(task);
    for (Task task : tasks) {
      std::vector<const LearningCurve*> ordered;
      for (const auto& c : curves)
        if (c.setting == setting && c.seed) ordered.push_back(&c);
      std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return *a->seed < *b->seed; });
      for (const auto& c : curves)
        if (c.setting == setting && !c.seed) ordered.push_back(&c);
      for (const auto* c : ordered) {
        const std::string seed = c->seed ? std::to_string(*c->seed) : "mean";
        for (const auto& p : c->points) {
          const auto it = p.eval.find(task);
          if (it == p.eval.end()) continue;
          out << setting << ',' << to_string(task) << ',' << seed << ',' << p.round << ',' << p.labeled_count << ','
              << format_double(it->second.micro_precision) << ',' << format_double(it->second.micro_recall) << ','
              << format_double(it->second.micro_f1) << '\n';
        }
      }
    }
  }
}

}  // namespace activelabel
