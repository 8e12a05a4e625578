#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "activelabel/active_loop.hpp"
#include "activelabel/corpus.hpp"
#include "activelabel/synthetic.hpp"

namespace activelabel {
namespace {

std::string id_of(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "d%04d", i);
  return buf;
}

Pool pool_with_unlabeled(int n) {
  Pool pool;
  for (int i = 0; i < n; ++i) pool.unlabeled.emplace(id_of(i), TokenSequence{{"w"}, id_of(i)});
  return pool;
}

// Predictor whose single-class probability is 1 - score, so uncertainty_score returns the score.
Predictor fixed_scores(std::map<std::string, double> scores) {
  return [scores = std::move(scores)](std::span<const std::string> ids) {
    std::vector<PredictionVector> out;
    for (const auto& id : ids) out.push_back({1.0 - scores.at(id)});
    return out;
  };
}

TEST(UncertaintyScore, Examples) {
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.9, 0.2, 0.1}), 0.1, 1e-15);
  EXPECT_EQ(uncertainty_score(std::vector<double>{0.5, 0.5}), 0.5);
  EXPECT_NEAR(uncertainty_score(std::vector<double>{0.99}), 0.01, 1e-15);
  EXPECT_THROW(uncertainty_score(std::vector<double>{}), Error);
}

TEST(UncertaintyScore, RangeAndMonotoneProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + rng.below(13));
    for (auto& v : p) v = open_sigmoid(rng.uniform(-30, 30));
    const double s = uncertainty_score(p);
    EXPECT_GE(s, 0.0);
    EXPECT_LT(s, 1.0);
    auto q = p;
    auto& top = *std::max_element(q.begin(), q.end());
    top = std::min(1.0, top + 0.5 * (1.0 - top));
    if (top < 1.0) {
      EXPECT_LE(uncertainty_score(q), s);
    }
  }
}

TEST(SelectBatch, TieBrokenByAscendingId) {
  Pool pool;
  for (const char* id : {"a", "b", "c"}) pool.unlabeled.emplace(id, TokenSequence{{"w"}, id});
  const auto picked = select_batch({"uncertainty"}, fixed_scores({{"a", 0.1}, {"b", 0.4}, {"c", 0.4}}), pool, 1);
  EXPECT_EQ(picked, (std::vector<std::string>{"b"}));
}

TEST(SelectBatch, ClampsToPoolSize) {
  auto pool = pool_with_unlabeled(3);
  const auto scores = fixed_scores({{id_of(0), 0.2}, {id_of(1), 0.3}, {id_of(2), 0.1}});
  EXPECT_EQ(select_batch({"uncertainty"}, scores, pool, 10), (std::vector<std::string>{id_of(1), id_of(0), id_of(2)}));
  auto random_pick = select_batch({"random"}, {}, pool, 10);
  std::sort(random_pick.begin(), random_pick.end());
  EXPECT_EQ(random_pick, (std::vector<std::string>{id_of(0), id_of(1), id_of(2)}));
}

TEST(SelectBatch, EmptyPoolAndBadInputs) {
  Pool empty;
  try {
    select_batch({"random"}, {}, empty, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PoolExhausted);
  }
  auto pool = pool_with_unlabeled(2);
  try {
    select_batch({"bald"}, {}, pool, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
  EXPECT_THROW(select_batch({"random"}, {}, pool, 0), Error);
}

TEST(SelectBatch, MatchesFullSortOracleWithTies) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 100;
    auto pool = pool_with_unlabeled(n);
    std::map<std::string, double> scores;
    // Coarse grid forces many exact ties.
    for (int i = 0; i < n; ++i) scores[id_of(i)] = static_cast<double>(rng.below(20)) / 40.0;
    std::vector<std::pair<double, std::string>> sorted;
    for (const auto& [id, s] : scores) sorted.emplace_back(-s, id);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = 1 + rng.below(n);
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < k; ++i) expected.push_back(sorted[i].second);
    ASSERT_EQ(select_batch({"uncertainty"}, fixed_scores(scores), pool, k), expected) << "trial " << trial;
  }
}

TEST(SelectBatch, InvariantUnderIncreasingTransformProperty) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto pool = pool_with_unlabeled(60);
    std::map<std::string, std::vector<double>> preds, transformed;
    for (const auto& [id, _] : pool.unlabeled) {
      std::vector<double> p(4);
      for (auto& v : p) v = std::round(rng.uniform() * 50) / 50;
      preds[id] = p;
      auto q = p;
      for (auto& v : q) v = std::pow(v, 3.0) * 0.9 + 0.05;
      transformed[id] = q;
    }
    auto predictor = [](const std::map<std::string, std::vector<double>>& m) -> Predictor {
      return [&m](std::span<const std::string> ids) {
        std::vector<PredictionVector> out;
        for (const auto& id : ids) out.push_back(m.at(id));
        return out;
      };
    };
    EXPECT_EQ(select_batch({"uncertainty"}, predictor(preds), pool, 10),
              select_batch({"uncertainty"}, predictor(transformed), pool, 10));
  }
}

TEST(SelectBatch, RandomIsSeededSampleWithoutReplacement) {
  auto pool = pool_with_unlabeled(200);
  const auto a = select_batch({"random", Task::Aspect, 5}, {}, pool, 50, 1);
  const auto b = select_batch({"random", Task::Aspect, 5}, {}, pool, 50, 1);
  const auto c = select_batch({"random", Task::Aspect, 5}, {}, pool, 50, 2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 50u);
  for (const auto& id : a) EXPECT_TRUE(pool.unlabeled.count(id));
}

TEST(SelectBatch, RandomIsRoughlyUniform) {
  auto pool = pool_with_unlabeled(10);
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 4000; ++seed)
    for (const auto& id : select_batch({"random", Task::Aspect, seed}, {}, pool, 3)) ++hits[id];
  for (const auto& [id, n] : hits) EXPECT_NEAR(n, 1200, 150) << id;
}

class LowestIdStrategy final : public SelectionStrategy {
 public:
  bool needs_model() const override { return false; }
  std::vector<std::string> select(std::span<const std::string> ids, const Predictor&, std::size_t k,
                                  std::uint64_t) const override {
    return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k)};
  }
};

TEST(SelectBatch, RegistryAcceptsNewStrategies) {
  register_strategy("lowest_id", [] { return std::make_unique<LowestIdStrategy>(); });
  auto pool = pool_with_unlabeled(5);
  EXPECT_EQ(select_batch({"lowest_id"}, {}, pool, 2), (std::vector<std::string>{id_of(0), id_of(1)}));
}

// ---------------------------------------------------------------------------

SynthSpec small_spec(int n, int n_val, std::uint64_t seed = 7) {
  SynthSpec spec;
  spec.n_samples = n;
  spec.n_validation = n_val;
  spec.aspect_classes = 4;
  spec.cluster_size = 4;
  spec.embedding_dim = 8;
  spec.filler_words = 10;
  spec.seed = seed;
  return spec;
}

EmbeddingTable table_from(const SyntheticCorpus& synth, const Vocabulary& vocab) {
  std::ostringstream out;
  write_embedding_text(out, synth.embedding_tokens, synth.embedding_vectors);
  std::istringstream in(out.str());
  return load_pretrained(in, vocab, 3);
}

ExperimentData small_experiment(const SyntheticCorpus& synth) {
  auto pool = make_simulation_pool(synth.documents, synth.taxonomy);
  return prepare_experiment(std::move(pool), [&](const Vocabulary& v) { return table_from(synth, v); }, 1);
}

LoopSettings quick_settings(std::string kind = "uncertainty") {
  LoopSettings s;
  s.hyper.hidden = 4;
  s.hyper.epochs = 2;
  s.hyper.batch_size = 16;
  s.strategy.kind = std::move(kind);
  s.k = 10;
  return s;
}

TEST(RunRound, MovesKDocumentsFromUnlabeledToLabeled) {
  const auto synth = generate_synthetic_corpus(small_spec(150, 30));
  const auto data = small_experiment(synth);
  Pool pool = data.pool;
  apply_selection(pool, initial_draw(pool, 50, 1), true);
  ASSERT_EQ(pool.labeled.size(), 50u);
  ASSERT_EQ(pool.unlabeled.size(), 100u);
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, data.pretrained);
  const auto before = pool.unlabeled;
  const auto result = run_round(pool, quick_settings(), ctx, 0);
  EXPECT_EQ(pool.labeled.size(), 60u);
  EXPECT_EQ(pool.unlabeled.size(), 90u);
  EXPECT_EQ(result.round.labeled_count, 50u);
  EXPECT_EQ(result.round.labeled_count_after, 60u);
  for (const auto& id : result.round.selected_ids) {
    EXPECT_TRUE(before.count(id));
    EXPECT_EQ(pool.labeled.at(id).labels, data.pool.hidden_oracle->at(id));
  }
  EXPECT_EQ(result.round.eval.size(), 2u);
  EXPECT_EQ(result.round.eval.at(Task::Aspect).n_samples, 30u);
  EXPECT_EQ(result.models.size(), 2u);
}

TEST(RunRound, SameSeedsGiveSameSelection) {
  const auto synth = generate_synthetic_corpus(small_spec(120, 20));
  const auto data = small_experiment(synth);
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, data.pretrained);
  std::vector<std::string> picks[2];
  for (auto& p : picks) {
    Pool pool = data.pool;
    apply_selection(pool, initial_draw(pool, 30, 4), true);
    p = run_round(pool, quick_settings(), ctx, 0).round.selected_ids;
  }
  EXPECT_EQ(picks[0], picks[1]);
}

TEST(RunRound, ConservesPoolAndNeverTouchesValidation) {
  const auto synth = generate_synthetic_corpus(small_spec(80, 20));
  const auto data = small_experiment(synth);
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, data.pretrained);
  Pool pool = data.pool;
  apply_selection(pool, initial_draw(pool, 20, 2), true);
  const auto total = pool.trainable_size();
  auto settings = quick_settings("random");
  settings.k = 25;
  std::size_t last = pool.labeled.size();
  for (std::size_t r = 0;; ++r) {
    if (pool.unlabeled.empty()) {
      try {
        run_round(pool, settings, ctx, r);
        FAIL();
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PoolExhausted);
      }
      break;
    }
    const auto result = run_round(pool, settings, ctx, r);
    EXPECT_EQ(pool.trainable_size(), total);
    EXPECT_GT(pool.labeled.size(), last);
    last = pool.labeled.size();
    for (const auto& id : result.round.selected_ids) EXPECT_FALSE(pool.validation.count(id));
    EXPECT_NO_THROW(pool.check_disjoint());
  }
  EXPECT_EQ(pool.labeled.size(), 80u);
}

TEST(RunRound, LiveModeMarksSelectionPending) {
  const auto synth = generate_synthetic_corpus(small_spec(60, 10));
  const auto data = small_experiment(synth);
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, data.pretrained);
  Pool pool = data.pool;
  apply_selection(pool, initial_draw(pool, 20, 2), true);
  auto settings = quick_settings();
  settings.simulate = false;
  const auto result = run_round(pool, settings, ctx, 0);
  EXPECT_EQ(pool.labeled.size(), 20u);
  EXPECT_EQ(pool.pending.size(), 10u);
  EXPECT_EQ(pool.unlabeled.size(), 30u);
  EXPECT_EQ(pool.trainable_size(), 60u);
}

TEST(RunRound, EmptyLabeledPoolIsAnError) {
  const auto synth = generate_synthetic_corpus(small_spec(30, 10));
  const auto data = small_experiment(synth);
  const auto ctx = EmbeddingContext<float>::from_table(data.vocab, data.pretrained);
  Pool pool = data.pool;
  try {
    run_round(pool, quick_settings(), ctx, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyPool);
  }
}

TEST(SimulationPool, ValidationOverlapIsAConfigError) {
  const auto synth = generate_synthetic_corpus(small_spec(10, 5));
  std::vector<Document> train(synth.documents.begin(), synth.documents.begin() + 10);
  std::vector<Document> validation(synth.documents.begin() + 9, synth.documents.end());
  try {
    make_simulation_pool(train, validation, synth.taxonomy);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
}

TEST(InitialDraw, CoversEveryClassAndIsSeeded) {
  const auto synth = generate_synthetic_corpus(small_spec(200, 10));
  const auto pool = make_simulation_pool(synth.documents, synth.taxonomy);
  const auto a = initial_draw(pool, 12, 5);
  EXPECT_EQ(a, initial_draw(pool, 12, 5));
  EXPECT_NE(a, initial_draw(pool, 12, 6));
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 12u);
  std::vector<int> seen(4, 0);
  for (const auto& id : a)
    for (std::size_t c = 0; c < 4; ++c) seen[c] += pool.hidden_oracle->at(id).aspect[c];
  for (int s : seen) EXPECT_GE(s, 1);
  EXPECT_EQ(initial_draw(pool, 500, 5).size(), 200u);
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig config;
  config.settings = {{"uncertainty_pretrained", EmbeddingMode::FrozenPretrained, "uncertainty"},
                     {"random_self_trained", EmbeddingMode::Trainable, "random"}};
  config.seeds = {1, 2};
  config.init_size = 20;
  config.k = 10;
  config.rounds = 3;
  config.hyper.hidden = 4;
  config.hyper.epochs = 2;
  return config;
}

TEST(RunExperiment, EmitsSeedCurvesAndMeanWithExpectedCounts) {
  const auto synth = generate_synthetic_corpus(small_spec(100, 20));
  const auto data = small_experiment(synth);
  const auto curves = run_experiment(data, tiny_experiment());
  ASSERT_EQ(curves.size(), 6u);
  EXPECT_EQ(curves[0].seed, 1u);
  EXPECT_EQ(curves[1].seed, 2u);
  EXPECT_FALSE(curves[2].seed);
  EXPECT_EQ(curves[3].setting, "random_self_trained");
  for (const auto& c : curves) {
    ASSERT_EQ(c.points.size(), 3u);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(c.points[r].labeled_count, 20 + r * 10);
  }
  for (std::size_t r = 0; r < 3; ++r) {
    const double expected =
        (curves[0].points[r].eval.at(Task::Aspect).micro_f1 + curves[1].points[r].eval.at(Task::Aspect).micro_f1) / 2;
    EXPECT_DOUBLE_EQ(curves[2].points[r].eval.at(Task::Aspect).micro_f1, expected);
  }
}

TEST(RunExperiment, ThreadedRunMatchesSequentialAndCsvIsStable) {
  const auto synth = generate_synthetic_corpus(small_spec(80, 20));
  const auto data = small_experiment(synth);
  auto config = tiny_experiment();
  config.rounds = 2;
  const auto sequential = run_experiment(data, config);
  config.threads = 3;
  const auto threaded = run_experiment(data, config);
  std::ostringstream a, b;
  write_curves_csv(a, sequential);
  write_curves_csv(b, threaded);
  const std::string csv = a.str();
  EXPECT_EQ(csv, b.str());
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kCurveCsvHeader);
  // 2 settings x 2 tasks x (2 seeds + mean) x 2 rounds, plus the header.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 3 * 2);
}

TEST(RunExperiment, RejectsBadConfig) {
  const auto synth = generate_synthetic_corpus(small_spec(40, 10));
  const auto data = small_experiment(synth);
  auto config = tiny_experiment();
  config.settings.push_back(config.settings.front());
  EXPECT_THROW(run_experiment(data, config), Error);
  config = tiny_experiment();
  config.settings[0].strategy = "nope";
  EXPECT_THROW(run_experiment(data, config), Error);
}

TEST(CurveCsv, RowOrderAndNumberFormat) {
  LearningCurve s2{"b", 2, {{0, 5, {{Task::Aspect, micro_scores({1, 1, 0})}}}}};
  LearningCurve s1{"b", 1, {{0, 5, {{Task::Aspect, micro_scores({1, 0, 0})}}}}};
  LearningCurve mean{"b", std::nullopt, {{0, 5, {{Task::Aspect, micro_scores({3, 1, 1})}}}}};
  LearningCurve other{"a", 1, {{0, 5, {{Task::Sentiment, micro_scores({0, 0, 0})}}}}};
  std::vector<LearningCurve> curves{mean, s2, s1, other};
  std::ostringstream out;
  write_curves_csv(out, curves);
  EXPECT_EQ(out.str(),
            "setting,task,seed,round,labeled_count,micro_precision,micro_recall,micro_f1\n"
            "b,aspect,1,0,5,1,1,1\n"
            "b,aspect,2,0,5,0.5,1,0.6666666666666666\n"
            "b,aspect,mean,0,5,0.75,0.75,0.75\n"
            "a,sentiment,1,0,5,1,1,1\n");
}

// ---------------------------------------------------------------------------

TEST(Synthetic, GeneratorContract) {
  SynthSpec spec;  // n=2000, C=13, noise=0.1, seed=7
  const auto synth = generate_synthetic_corpus(spec);
  std::ostringstream rows;
  write_corpus(rows, synth.documents);
  std::istringstream in(rows.str());
  const auto docs = read_corpus(in);
  EXPECT_EQ(std::count_if(docs.begin(), docs.end(), [](const Document& d) { return d.split == Split::Train; }), 2000);
  EXPECT_EQ(synth.taxonomy, Taxonomy::reviews());
  for (const auto& d : docs) {
    ASSERT_TRUE(d.aspects);
    EXPECT_GE(d.aspects->size(), 1u);
    EXPECT_LE(d.aspects->size(), 3u);
    EXPECT_NO_THROW(d.labels(synth.taxonomy, Task::Aspect));
    EXPECT_NO_THROW(d.labels(synth.taxonomy, Task::Sentiment));
    EXPECT_FALSE(d.sentiment->empty());
  }
}

TEST(Synthetic, SameSpecSameBytes) {
  auto dump = [](const SynthSpec& spec) {
    const auto s = generate_synthetic_corpus(spec);
    std::ostringstream out;
    write_corpus(out, s.documents);
    write_embedding_text(out, s.embedding_tokens, s.embedding_vectors);
    return out.str();
  };
  const auto spec = small_spec(100, 10);
  EXPECT_EQ(dump(spec), dump(spec));
  EXPECT_NE(dump(spec), dump(small_spec(100, 10, 8)));
}

TEST(Synthetic, NoiselessCorpusIsSolvedByTokenCountOracle) {
  SynthSpec spec;
  spec.noise = 0;
  spec.n_samples = 1500;
  spec.n_validation = 500;
  const auto synth = generate_synthetic_corpus(spec);
  const std::size_t C = synth.taxonomy.aspects.size();
  // Count, per token, the documents of each class it occurs in.
  std::map<std::string, std::vector<double>> with_class;
  std::map<std::string, double> total;
  for (const auto& d : synth.documents) {
    if (d.split != Split::Train) continue;
    const auto y = d.labels(synth.taxonomy, Task::Aspect);
    const auto tokens = tokenize(d.text).tokens;
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end())) {
      auto& v = with_class[t];
      v.resize(C);
      for (std::size_t c = 0; c < C; ++c) v[c] += y[c];
      total[t] += 1;
    }
  }
  std::vector<LabelVector> pred, gold;
  for (const auto& d : synth.documents) {
    if (d.split != Split::Validation) continue;
    LabelVector p(C, 0);
    for (const auto& t : tokenize(d.text).tokens) {
      const auto it = with_class.find(t);
      if (it == with_class.end()) continue;
      for (std::size_t c = 0; c < C; ++c)
        if (it->second[c] / total[t] > 0.9) p[c] = 1;
    }
    pred.push_back(p);
    gold.push_back(d.labels(synth.taxonomy, Task::Aspect));
  }
  EXPECT_GT(micro_scores(accumulate(pred, gold)).micro_f1, 0.95);
}

TEST(Synthetic, RejectsDegenerateSpecs) {
  SynthSpec spec;
  spec.aspect_classes = 1;
  EXPECT_THROW(generate_synthetic_corpus(spec), Error);
  spec = SynthSpec{};
  spec.noise = 1.5;
  EXPECT_THROW(generate_synthetic_corpus(spec), Error);
}

// ---------------------------------------------------------------------------

TEST(Corpus, ReadsLabeledUnlabeledAndValidationRows) {
  std::istringstream in(
      "{\"id\":\"r1\",\"text\":\"Slow refund\",\"aspects\":[\"Loyalty\",\"Contract\"],\"sentiment\":[\"Negative\"]}\n"
      "\n"
      "{\"id\":\"r2\",\"text\":\"No labels here\"}\n"
      "{\"id\":\"r3\",\"text\":\"Fine\",\"sentiment\":[\"Positive\"],\"split\":\"validation\"}\n");
  const auto docs = read_corpus(in);
  ASSERT_EQ(docs.size(), 3u);
  const auto taxonomy = Taxonomy::reviews();
  const auto y = docs[0].labels(taxonomy, Task::Aspect);
  EXPECT_EQ(std::count(y.begin(), y.end(), 1), 2);
  EXPECT_EQ(y[2], 1);
  EXPECT_EQ(y[3], 1);
  EXPECT_FALSE(docs[1].labeled());
  EXPECT_EQ(docs[2].split, Split::Validation);
  EXPECT_EQ(docs[2].labels(taxonomy, Task::Aspect), LabelVector(13, 0));
}

TEST(Corpus, MalformedRowsReportLineNumbers) {
  const std::vector<std::pair<std::string, std::size_t>> cases{
      {"{\"id\":\"a\",\"text\":\"x\"}\n{not json\n", 2},
      {"{\"id\":\"a\",\"text\":\"x\"}\n\n{\"id\":\"a\",\"text\":\"y\"}\n", 3},
      {"{\"id\":\"a\",\"text\":\"x\",\"stars\":5}\n", 1},
      {"{\"text\":\"x\"}\n", 1},
      {"{\"id\":\"a\"}\n", 1},
      {"{\"id\":\"a\",\"text\":\"x\",\"aspects\":\"Loyalty\"}\n", 1},
      {"{\"id\":\"a\",\"text\":\"x\",\"split\":\"validation\"}\n", 1},
      {"[1,2]\n", 1},
  };
  for (const auto& [text, line] : cases) {
    std::istringstream in(text);
    try {
      read_corpus(in);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::IngestError) << text;
      EXPECT_EQ(e.line(), line) << text;
    }
  }
}

TEST(Corpus, UnknownLabelIsTaxonomyError) {
  std::istringstream in("{\"id\":\"a\",\"text\":\"x\",\"aspects\":[\"Pricing\"]}\n");
  const auto docs = read_corpus(in);
  try {
    docs[0].labels(Taxonomy::reviews(), Task::Aspect);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TaxonomyError);
  }
}

TEST(Corpus, WriteReadRoundTrip) {
  const auto synth = generate_synthetic_corpus(small_spec(20, 5));
  std::ostringstream out;
  write_corpus(out, synth.documents);
  std::istringstream in(out.str());
  EXPECT_EQ(read_corpus(in), synth.documents);
}

}  // namespace
}  // namespace activelabel
