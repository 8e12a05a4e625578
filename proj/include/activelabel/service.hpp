#pragma once

// Live annotation service over a single-directory store:
//   state.json     manifest: config, rounds, checkpoint files, leases
//   corpus.jsonl   every ingested row, as ingested
//   audit.jsonl    append-only label submissions
//   checkpoints/   one file per task per round
// The labeled pool is the corpus' labeled rows plus the audit log replayed
// in order.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "activelabel/active_loop.hpp"
#include "activelabel/checkpoint.hpp"
#include "activelabel/config.hpp"
#include "activelabel/corpus.hpp"
#include "activelabel/error.hpp"
#include "activelabel/metrics.hpp"

namespace activelabel {

using Clock = std::function<std::int64_t()>;  // seconds since the epoch

inline std::int64_t system_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

struct AnnotationTask {
  std::string id;
  std::string text;
  PredictionVector aspect;     // empty before the first retrain
  PredictionVector sentiment;  // empty before the first retrain
  std::optional<double> uncertainty;
  std::int64_t queued_at = 0;

  bool operator==(const AnnotationTask&) const = default;
};

struct QueueResult {
  std::vector<AnnotationTask> tasks;
  bool ranked = false;  // false: no model yet, tasks are in seeded random order
};

struct LabelSubmission {
  std::string id;
  std::vector<std::string> aspects;
  std::vector<std::string> sentiment;
  std::string annotator;
  std::int64_t at = 0;
};

struct PoolCounts {
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t validation = 0;
  std::size_t leased = 0;
};

struct Metrics {
  std::size_t round = 0;
  std::map<Task, EvalReport> eval;
  PoolCounts counts;
};

enum class JobState { Idle, Running, Failed };

inline std::string_view to_string(JobState s) {
  switch (s) {
    case JobState::Idle: return "idle";
    case JobState::Running: return "running";
    case JobState::Failed: return "failed";
  }
  return "idle";
}

struct TrainStatus {
  JobState state = JobState::Idle;
  std::size_t job = 0;  // jobs started so far
  std::size_t rounds = 0;
  std::string error;
};

inline nlohmann::json submission_to_json(const LabelSubmission& s) {
  return {{"id", s.id}, {"aspects", s.aspects}, {"sentiment", s.sentiment}, {"annotator", s.annotator}, {"at", s.at}};
}

inline LabelSubmission submission_from_json(const nlohmann::json& j) {
  LabelSubmission s;
  s.id = j.at("id").get<std::string>();
  s.aspects = j.at("aspects").get<std::vector<std::string>>();
  s.sentiment = j.at("sentiment").get<std::vector<std::string>>();
  s.annotator = j.at("annotator").get<std::string>();
  s.at = j.at("at").get<std::int64_t>();
  return s;
}

/// Applies submissions in order. Unknown or already labeled ids are errors.
inline void replay_audit(Pool& pool, std::span<const LabelSubmission> log, const Taxonomy& taxonomy) {
  for (const auto& s : log) {
    auto node = pool.unlabeled.extract(s.id);
    if (node.empty()) throw Error(ErrorCode::FormatError, "audit entry for '" + s.id + "' is not unlabeled");
    pool.labeled.emplace(s.id, LabeledDoc{std::move(node.mapped()), {taxonomy.encode(s.aspects, Task::Aspect),
                                                                     taxonomy.encode(s.sentiment, Task::Sentiment)}});
  }
}

inline nlohmann::json round_to_json(const Round& r) {
  nlohmann::json eval = nlohmann::json::object();
  for (const auto& [task, report] : r.eval) eval[std::string(to_string(task))] = report;
  return {{"index", r.index},
          {"labeled_count", r.labeled_count},
          {"labeled_count_after", r.labeled_count_after},
          {"selected_ids", r.selected_ids},
          {"eval", eval}};
}

inline Round round_from_json(const nlohmann::json& j) {
  Round r;
  r.index = j.at("index").get<std::size_t>();
  r.labeled_count = j.at("labeled_count").get<std::size_t>();
  r.labeled_count_after = j.at("labeled_count_after").get<std::size_t>();
  r.selected_ids = j.at("selected_ids").get<std::vector<std::string>>();
  for (const auto& [task, report] : j.at("eval").items()) r.eval.emplace(parse_task(task), report.get<EvalReport>());
  return r;
}

inline nlohmann::json task_to_json(const AnnotationTask& t) {
  return {{"id", t.id},
          {"text", t.text},
          {"predictions", {{"aspect", t.aspect}, {"sentiment", t.sentiment}}},
          {"uncertainty", t.uncertainty ? nlohmann::json(*t.uncertainty) : nlohmann::json(nullptr)},
          {"queued_at", t.queued_at}};
}

namespace detail {

inline void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline void append_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  for (const auto& line : lines) out << line << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
}

}  // namespace detail

class Service {
 public:
  static constexpr const char* kStateFile = "state.json";
  static constexpr const char* kCorpusFile = "corpus.jsonl";
  static constexpr const char* kAuditFile = "audit.jsonl";

  /// Creates an empty store. Fails with Conflict if one already exists.
  static void init_store(const std::filesystem::path& dir, const Config& config) {
    config.validate();
    std::filesystem::create_directories(dir / "checkpoints");
    if (std::filesystem::exists(dir / kStateFile))
      throw Error(ErrorCode::Conflict, "store already exists at " + dir.string());
    detail::append_lines(dir / kCorpusFile, {});
    detail::append_lines(dir / kAuditFile, {});
    Config stored = config;
    for (auto* path : {&stored.embedding.path, &stored.experiment.corpus, &stored.experiment.validation})
      if (!path->empty()) *path = std::filesystem::absolute(*path).lexically_normal().string();
    nlohmann::json state{{"format", 1},
                         {"config", config_to_json(stored)},
                         {"rounds", nlohmann::json::array()},
                         {"checkpoints", nlohmann::json::object()},
                         {"leases", nlohmann::json::array()},
                         {"labeled_since_round", nlohmann::json::array()}};
    detail::write_file_atomically(dir / kStateFile, state.dump(2) + "\n");
  }

  explicit Service(std::filesystem::path dir, Clock clock = system_seconds)
      : dir_(std::move(dir)), clock_(std::move(clock)) {
    load();
  }

  ~Service() { wait_for_training(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const Config& config() const { return config_; }
  const Taxonomy& taxonomy() const { return config_.taxonomy; }

  /// Adds JSONL rows. Either every row is accepted or none is.
  PoolCounts ingest(std::istream& in) {
    auto docs = read_corpus(in);
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const auto& doc = docs[i];
      try {
        doc.labels(config_.taxonomy, Task::Aspect);
        doc.labels(config_.taxonomy, Task::Sentiment);
        tokenize(doc.text, config_.embedding.max_seq_len);
      } catch (const Error& e) {
        throw Error(e.code(), "row '" + doc.id + "': " + e.detail());
      }
      if (documents_.count(doc.id)) throw Error(ErrorCode::IngestError, "id '" + doc.id + "' already ingested");
    }
    std::vector<std::string> lines;
    for (const auto& doc : docs) lines.push_back(document_to_json(doc).dump());
    detail::append_lines(dir_ / kCorpusFile, lines);
    std::vector<std::string> fresh;
    for (auto& doc : docs) {
      add_document(doc);
      if (!doc.labeled() && doc.split == Split::Train) fresh.push_back(doc.id);
      documents_.emplace(doc.id, std::move(doc));
    }
    if (snapshot_ && !fresh.empty()) {
      auto next = std::make_shared<Snapshot>(*snapshot_);
      score_into(*next, fresh);
      snapshot_ = std::move(next);
    }
    return counts_locked();
  }

  /// Top-n unlabeled documents by uncertainty, skipping ones leased to other
  /// annotators. Returned tasks are leased to `annotator`.
  QueueResult queue_next(std::size_t n, const std::string& annotator = "") {
    std::lock_guard lock(mutex_);
    if (pool_.unlabeled.empty()) throw Error(ErrorCode::PoolExhausted, "no unlabeled documents remain");
    const auto now = clock_();
    QueueResult result;
    result.ranked = snapshot_ != nullptr;
    auto consider = [&](const std::string& id) {
      if (result.tasks.size() >= n || !pool_.unlabeled.count(id)) return;
      auto lease = leases_.find(id);
      if (lease != leases_.end() && lease->second.expires > now && lease->second.annotator != annotator) return;
      if (lease == leases_.end() || lease->second.expires <= now || lease->second.annotator != annotator)
        lease = leases_.insert_or_assign(id, Lease{annotator, now, 0}).first;
      lease->second.expires = now + 60 * static_cast<std::int64_t>(config_.service.lease_minutes);
      AnnotationTask task;
      task.id = id;
      task.text = documents_.at(id).text;
      task.queued_at = lease->second.queued_at;
      if (snapshot_) {
        const auto& scored = snapshot_->scores.at(id);
        task.aspect = scored.aspect;
        task.sentiment = scored.sentiment;
        task.uncertainty = scored.uncertainty;
      }
      result.tasks.push_back(std::move(task));
    };
    if (snapshot_) {
      for (const auto& [score, id] : snapshot_->ranking) consider(id);
    } else {
      for (const auto& id : unranked_order()) consider(id);
    }
    save_state_locked();
    return result;
  }

  /// Moves a document to the labeled pool and records it in the audit log.
  std::size_t submit_labels(const LabelSubmission& submission) {
    std::unique_lock lock(mutex_);
    const auto& id = submission.id;
    if (pool_.labeled.count(id) || pool_.validation.count(id))
      throw Error(ErrorCode::Conflict, "'" + id + "' is already labeled");
    if (!pool_.unlabeled.count(id)) throw Error(ErrorCode::NotFound, "no document '" + id + "'");
    LabelSubmission entry = submission;
    entry.at = clock_();
    LabeledDoc doc{pool_.unlabeled.at(id), {config_.taxonomy.encode(entry.aspects, Task::Aspect),
                                            config_.taxonomy.encode(entry.sentiment, Task::Sentiment)}};
    detail::append_lines(dir_ / kAuditFile, {submission_to_json(entry).dump()});
    pool_.unlabeled.erase(id);
    pool_.labeled.emplace(id, std::move(doc));
    leases_.erase(id);
    labeled_since_round_.push_back(id);
    save_state_locked();
    const auto labeled = pool_.labeled.size();
    const auto every = config_.service.auto_retrain_every;
    if (every > 0 && labeled_since_round_.size() >= every && status_.state != JobState::Running) {
      lock.unlock();
      try {
        trigger_retrain();
      } catch (const Error&) {
      }
    }
    return labeled;
  }

  /// Starts a background retrain of both task models. Returns the job number.
  std::size_t trigger_retrain() {
    std::lock_guard lock(mutex_);
    if (status_.state == JobState::Running) throw Error(ErrorCode::Busy, "a retrain is already running");
    if (pool_.labeled.empty()) throw Error(ErrorCode::EmptyPool, "labeled pool is empty");
    if (worker_.joinable()) worker_.join();
    status_.state = JobState::Running;
    status_.error.clear();
    const auto job = ++status_.job;
    auto pool = std::make_shared<const Pool>(pool_);
    worker_ = std::thread([this, pool] { run_training(*pool); });
    return job;
  }

  TrainStatus train_status() const {
    std::lock_guard lock(mutex_);
    auto s = status_;
    s.rounds = rounds_.size();
    return s;
  }

  void wait_for_training() {
    std::unique_lock lock(mutex_);
    done_.wait(lock, [&] { return status_.state != JobState::Running; });
    lock.unlock();
    if (worker_.joinable()) worker_.join();
  }

  Metrics get_metrics() const {
    std::lock_guard lock(mutex_);
    if (rounds_.empty()) throw Error(ErrorCode::NoRoundsYet, "no completed retrain yet");
    return {rounds_.back().index, rounds_.back().eval, counts_locked()};
  }

  PoolCounts counts() const {
    std::lock_guard lock(mutex_);
    return counts_locked();
  }

  std::vector<Round> rounds() const {
    std::lock_guard lock(mutex_);
    return rounds_;
  }

  LearningCurve get_curve() const {
    std::lock_guard lock(mutex_);
    if (rounds_.empty()) throw Error(ErrorCode::NoRoundsYet, "no completed retrain yet");
    LearningCurve curve{"live", config_.seed, {}};
    for (const auto& r : rounds_) curve.points.push_back({r.index, r.labeled_count, r.eval});
    return curve;
  }

  std::string curve_csv() const {
    std::ostringstream out;
    const std::vector<LearningCurve> curves{get_curve()};
    write_curves_csv(out, curves);
    return out.str();
  }

  /// Labeled pool as currently held (corpus labels plus replayed audit).
  std::map<std::string, LabeledDoc> labeled() const {
    std::lock_guard lock(mutex_);
    return pool_.labeled;
  }

  std::vector<LabelSubmission> audit_log() const {
    std::lock_guard lock(mutex_);
    return read_audit();
  }

  /// Pool built from the corpus file alone, before any submission.
  Pool initial_pool() const {
    std::lock_guard lock(mutex_);
    Pool pool;
    for (const auto& [id, doc] : documents_) add_document_to(pool, doc);
    return pool;
  }

 private:
  struct Lease {
    std::string annotator;
    std::int64_t queued_at = 0;
    std::int64_t expires = 0;
  };

  struct Scored {
    PredictionVector aspect;
    PredictionVector sentiment;
    double uncertainty = 0;
  };

  /// Immutable once published; replaced wholesale.
  struct Snapshot {
    TaskModels models;
    std::map<std::string, Scored> scores;
    std::vector<std::pair<double, std::string>> ranking;  // (-uncertainty, id) ascending
  };

  void add_document_to(Pool& pool, const Document& doc) const {
    const auto tokens = tokenize(doc.text, config_.embedding.max_seq_len, doc.id);
    if (doc.split == Split::Validation) {
      pool.validation.emplace(doc.id, LabeledDoc{tokens, {doc.labels(config_.taxonomy, Task::Aspect),
                                                          doc.labels(config_.taxonomy, Task::Sentiment)}});
    } else if (doc.labeled()) {
      pool.labeled.emplace(doc.id, LabeledDoc{tokens, {doc.labels(config_.taxonomy, Task::Aspect),
                                                       doc.labels(config_.taxonomy, Task::Sentiment)}});
    } else {
      pool.unlabeled.emplace(doc.id, tokens);
    }
  }

  void add_document(const Document& doc) { add_document_to(pool_, doc); }

  PoolCounts counts_locked() const {
    PoolCounts c{pool_.labeled.size(), pool_.unlabeled.size(), pool_.validation.size(), 0};
    const auto now = clock_();
    for (const auto& [id, lease] : leases_) c.leased += lease.expires > now && pool_.unlabeled.count(id);
    return c;
  }

  std::vector<std::string> unranked_order() const {
    std::vector<std::string> ids;
    for (const auto& [id, _] : pool_.unlabeled) ids.push_back(id);
    Rng rng(mix_seed(config_.seed, 0x9E0E));
    rng.shuffle(ids);
    return ids;
  }

  LoopSettings loop_settings() const {
    LoopSettings s;
    s.hyper = config_.hyper;
    s.hyper.seed = mix_seed(config_.hyper.seed, config_.seed);
    s.strategy = {config_.selection.strategy, config_.selection.driver_task, config_.seed};
    s.k = config_.selection.k;
    s.tasks = {Task::Aspect, Task::Sentiment};
    s.threshold = config_.threshold;
    s.force_top1 = config_.force_top1;
    s.simulate = false;
    return s;
  }

  /// Predicts for `ids` (all unlabeled) and merges them into the ranking.
  void score_into(Snapshot& snap, const std::vector<std::string>& ids) const {
    std::vector<const TokenSequence*> seqs;
    for (const auto& id : ids) seqs.push_back(&pool_.unlabeled.at(id));
    score_sequences(snap, ids, seqs, config_.selection.driver_task);
  }

  static void score_sequences(Snapshot& snap, const std::vector<std::string>& ids,
                              const std::vector<const TokenSequence*>& seqs, Task driver) {
    std::map<Task, std::vector<PredictionVector>> preds;
    for (const auto& [task, model] : snap.models) preds[task] = predict_sequences(model, seqs);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Scored s;
      s.aspect = preds[Task::Aspect][i];
      s.sentiment = preds[Task::Sentiment][i];
      s.uncertainty = uncertainty_score(driver == Task::Aspect ? s.aspect : s.sentiment);
      snap.scores.insert_or_assign(ids[i], std::move(s));
    }
    snap.ranking.clear();
    for (const auto& [id, s] : snap.scores) snap.ranking.emplace_back(-s.uncertainty, id);
    std::sort(snap.ranking.begin(), snap.ranking.end());
  }

  void run_training(const Pool& pool) {
    try {
      const auto settings = loop_settings();
      std::vector<TokenSequence> texts;
      for (const auto& [id, doc] : pool.labeled) texts.push_back(doc.tokens);
      for (const auto& [id, seq] : pool.unlabeled) texts.push_back(seq);
      const auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(texts, config_.embedding.min_count));
      const auto ctx = EmbeddingContext<float>::from_table(vocab, config_embedding(config_, *vocab),
                                                           config_.embedding.max_seq_len);
      auto snap = std::make_shared<Snapshot>();
      snap->models = train_models(pool, settings, ctx);
      const auto eval = evaluate_models(snap->models, pool, settings.threshold, settings.force_top1);
      std::vector<std::string> ids;
      std::vector<const TokenSequence*> seqs;
      for (const auto& [id, seq] : pool.unlabeled) {
        ids.push_back(id);
        seqs.push_back(&seq);
      }
      score_sequences(*snap, ids, seqs, config_.selection.driver_task);

      std::unique_lock lock(mutex_);
      const std::size_t index = rounds_.size();
      std::map<std::string, std::string> files;
      for (const auto& [task, model] : snap->models) {
        char name[64];
        std::snprintf(name, sizeof name, "checkpoints/round-%04zu-%s.ckpt", index, std::string(to_string(task)).c_str());
        save_checkpoint(dir_ / name, model);
        files[std::string(to_string(task))] = name;
      }
      // Rows ingested while training get scored by the new models.
      std::vector<std::string> fresh;
      for (const auto& [id, _] : pool_.unlabeled)
        if (!snap->scores.count(id)) fresh.push_back(id);
      if (!fresh.empty()) score_into(*snap, fresh);
      for (auto it = snap->scores.begin(); it != snap->scores.end();)
        it = pool_.unlabeled.count(it->first) ? std::next(it) : snap->scores.erase(it);
      snap->ranking.clear();
      for (const auto& [id, s] : snap->scores) snap->ranking.emplace_back(-s.uncertainty, id);
      std::sort(snap->ranking.begin(), snap->ranking.end());

      Round round;
      round.index = index;
      round.labeled_count = pool.labeled.size();
      round.labeled_count_after = pool_.labeled.size();
      for (const auto& id : labeled_since_round_)
        if (pool.labeled.count(id)) round.selected_ids.push_back(id);
      std::erase_if(labeled_since_round_, [&](const std::string& id) { return pool.labeled.count(id) > 0; });
      round.eval = eval;
      rounds_.push_back(std::move(round));
      checkpoint_files_ = std::move(files);
      snapshot_ = std::move(snap);
      save_state_locked();
      status_.state = JobState::Idle;
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      status_.state = JobState::Failed;
      status_.error = e.what();
    }
    done_.notify_all();
  }

  std::vector<LabelSubmission> read_audit() const {
    std::vector<LabelSubmission> log;
    std::ifstream in(dir_ / kAuditFile);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        log.push_back(submission_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("audit log: ") + e.what(), line_no);
      }
    }
    return log;
  }

  void load() {
    std::ifstream state_in(dir_ / kStateFile);
    if (!state_in) throw Error(ErrorCode::NotFound, "no store at " + dir_.string());
    nlohmann::json state;
    try {
      state = nlohmann::json::parse(state_in);
      config_ = config_from_json(state.at("config"));
      for (const auto& r : state.at("rounds")) rounds_.push_back(round_from_json(r));
      for (const auto& [task, file] : state.at("checkpoints").items()) checkpoint_files_[task] = file.get<std::string>();
      for (const auto& l : state.at("leases"))
        leases_[l.at("id").get<std::string>()] = {l.at("annotator").get<std::string>(),
                                                  l.at("queued_at").get<std::int64_t>(),
                                                  l.at("expires").get<std::int64_t>()};
      labeled_since_round_ = state.at("labeled_since_round").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, std::string("state.json: ") + e.what());
    }
    std::ifstream corpus_in(dir_ / kCorpusFile);
    for (auto& doc : read_corpus(corpus_in)) {
      add_document(doc);
      documents_.emplace(doc.id, std::move(doc));
    }
    replay_audit(pool_, read_audit(), config_.taxonomy);
    if (!checkpoint_files_.empty()) {
      auto snap = std::make_shared<Snapshot>();
      for (const auto& [task, file] : checkpoint_files_)
        snap->models.emplace(parse_task(task), load_checkpoint<float>(dir_ / file));
      std::vector<std::string> ids;
      for (const auto& [id, _] : pool_.unlabeled) ids.push_back(id);
      score_into(*snap, ids);
      snapshot_ = std::move(snap);
    }
  }

  void save_state_locked() const {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : rounds_) rounds.push_back(round_to_json(r));
    nlohmann::json leases = nlohmann::json::array();
    for (const auto& [id, l] : leases_)
      leases.push_back({{"id", id}, {"annotator", l.annotator}, {"queued_at", l.queued_at}, {"expires", l.expires}});
    nlohmann::json state{{"format", 1},
                         {"config", config_to_json(config_)},
                         {"rounds", rounds},
                         {"checkpoints", checkpoint_files_},
                         {"leases", leases},
                         {"labeled_since_round", labeled_since_round_}};
    detail::write_file_atomically(dir_ / kStateFile, state.dump(2) + "\n");
  }

  std::filesystem::path dir_;
  Clock clock_;
  Config config_;
  mutable std::mutex mutex_;
  std::condition_variable done_;
  std::map<std::string, Document> documents_;
  Pool pool_;
  std::map<std::string, Lease> leases_;
  std::vector<Round> rounds_;
  std::vector<std::string> labeled_since_round_;
  std::map<std::string, std::string> checkpoint_files_;
  std::shared_ptr<const Snapshot> snapshot_;
  TrainStatus status_;
  std::thread worker_;
};

}  // namespace activelabel
