#pragma once

// Synthetic review corpus with the shape of the aspect/sentiment task. Every
// aspect class owns a cluster of words, polarity has two clusters, and filler
// words carry no signal. The companion "pretrained" vectors place each word
// near its cluster centroid, so they encode what a self-trained table must
// learn from labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "activelabel/checkpoint.hpp"
#include "activelabel/corpus.hpp"
#include "activelabel/embedding.hpp"
#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"
#include "activelabel/random.hpp"

namespace activelabel {

struct SynthSpec {
  int n_samples = 2000;    // train-split documents
  int n_validation = 400;  // validation-split documents
  int aspect_classes = 13;
  int cluster_size = 8;    // words per class cluster
  double noise = 0.1;      // chance each class word is joined by a random content word
  std::uint64_t seed = 7;
  int embedding_dim = 32;
  double cluster_spread = 0.35;  // per-word deviation from the centroid
  int filler_words = 60;
  int min_filler = 3;
  int max_filler = 8;

  void validate() const {
    if (aspect_classes < 2) throw Error(ErrorCode::ConfigError, "synthetic corpus needs at least 2 aspect classes");
    if (n_samples < 0 || n_validation < 0 || n_samples + n_validation == 0)
      throw Error(ErrorCode::ConfigError, "synthetic corpus needs documents");
    if (cluster_size < 1 || embedding_dim < 1 || filler_words < 1 || min_filler < 0 || max_filler < min_filler)
      throw Error(ErrorCode::ConfigError, "invalid synthetic vocabulary settings");
    if (noise < 0 || noise > 1) throw Error(ErrorCode::ConfigError, "noise must lie in [0, 1]");
  }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"n_samples", s.n_samples},         {"n_validation", s.n_validation},
                     {"aspect_classes", s.aspect_classes}, {"cluster_size", s.cluster_size},
                     {"noise", s.noise},                 {"seed", s.seed},
                     {"embedding_dim", s.embedding_dim}, {"cluster_spread", s.cluster_spread},
                     {"filler_words", s.filler_words},   {"min_filler", s.min_filler},
                     {"max_filler", s.max_filler}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  detail::reject_unknown_keys(j, {"n_samples", "n_validation", "aspect_classes", "cluster_size", "noise", "seed",
                                  "embedding_dim", "cluster_spread", "filler_words", "min_filler", "max_filler"},
                              "synthetic spec");
  s.n_samples = j.value("n_samples", s.n_samples);
  s.n_validation = j.value("n_validation", s.n_validation);
  s.aspect_classes = j.value("aspect_classes", s.aspect_classes);
  s.cluster_size = j.value("cluster_size", s.cluster_size);
  s.noise = j.value("noise", s.noise);
  s.seed = j.value("seed", s.seed);
  s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
  s.cluster_spread = j.value("cluster_spread", s.cluster_spread);
  s.filler_words = j.value("filler_words", s.filler_words);
  s.min_filler = j.value("min_filler", s.min_filler);
  s.max_filler = j.value("max_filler", s.max_filler);
}

struct SyntheticCorpus {
  Taxonomy taxonomy;
  std::vector<Document> documents;
  std::vector<std::string> embedding_tokens;
  RowMatrix embedding_vectors;
  /// Word lists per aspect class, then positive, then negative.
  std::vector<std::vector<std::string>> clusters;
};

inline std::string synthetic_word(char kind, int cluster, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%02dw%02d", kind, cluster, index);
  return buf;
}

inline SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec) {
  spec.validate();
  SyntheticCorpus out;
  const int C = spec.aspect_classes;
  if (C == static_cast<int>(kReviewAspects.size())) {
    out.taxonomy = Taxonomy::reviews();
  } else {
    for (int c = 0; c < C; ++c) out.taxonomy.aspects.push_back("Aspect " + std::to_string(c + 1));
    for (const auto& s : kReviewSentiments) out.taxonomy.sentiment.emplace_back(s.name);
  }

  // Class frequencies follow the review collection when it has 13 classes.
  std::vector<double> weights(static_cast<std::size_t>(C), 1.0);
  if (C == static_cast<int>(kReviewAspects.size()))
    for (int c = 0; c < C; ++c) weights[static_cast<std::size_t>(c)] = kReviewAspects[static_cast<std::size_t>(c)].training;

  for (int c = 0; c < C; ++c) {
    std::vector<std::string> words;
    for (int w = 0; w < spec.cluster_size; ++w) words.push_back(synthetic_word('a', c, w));
    out.clusters.push_back(std::move(words));
  }
  for (char kind : {'p', 'n'}) {
    std::vector<std::string> words;
    for (int w = 0; w < spec.cluster_size; ++w) words.push_back(synthetic_word(kind, 0, w));
    out.clusters.push_back(std::move(words));
  }
  std::vector<std::string> filler;
  for (int w = 0; w < spec.filler_words; ++w) filler.push_back(synthetic_word('f', 0, w));
  std::vector<std::string> content;
  for (int c = 0; c < C; ++c)
    content.insert(content.end(), out.clusters[static_cast<std::size_t>(c)].begin(),
                   out.clusters[static_cast<std::size_t>(c)].end());

  Rng rng(mix_seed(spec.seed, 0xC0));
  const int total = spec.n_samples + spec.n_validation;
  for (int d = 0; d < total; ++d) {
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "doc%06d", d);
    doc.id = id;
    doc.split = d < spec.n_samples ? Split::Train : Split::Validation;

    const double r = rng.uniform();
    const int n_aspects = std::min(C, r < 0.55 ? 1 : (r < 0.85 ? 2 : 3));
    std::vector<double> w = weights;
    std::vector<int> classes;
    for (int k = 0; k < n_aspects; ++k) {
      const auto c = static_cast<int>(rng.weighted(w));
      classes.push_back(c);
      w[static_cast<std::size_t>(c)] = 0;
    }
    std::sort(classes.begin(), classes.end());

    const double s = rng.uniform();
    const bool positive = s < 0.7;
    const bool negative = s >= 0.45;

    std::vector<std::string> tokens;
    for (int c : classes) {
      const auto& cluster = out.clusters[static_cast<std::size_t>(c)];
      for (int k = rng.between(1, 3); k > 0; --k) {
        tokens.push_back(cluster[rng.below(cluster.size())]);
        if (rng.bernoulli(spec.noise)) tokens.push_back(content[rng.below(content.size())]);
      }
    }
    for (int pol = 0; pol < 2; ++pol) {
      if (pol == 0 ? !positive : !negative) continue;
      const auto& cluster = out.clusters[static_cast<std::size_t>(C + pol)];
      for (int k = rng.between(1, 2); k > 0; --k) tokens.push_back(cluster[rng.below(cluster.size())]);
    }
    for (int k = rng.between(spec.min_filler, spec.max_filler); k > 0; --k)
      tokens.push_back(filler[rng.below(filler.size())]);
    rng.shuffle(tokens);

    for (const auto& t : tokens) {
      if (!doc.text.empty()) doc.text += ' ';
      doc.text += t;
    }
    doc.text += " .";
    std::vector<std::string> aspect_names;
    for (int c : classes) aspect_names.push_back(out.taxonomy.aspects[static_cast<std::size_t>(c)]);
    doc.aspects = std::move(aspect_names);
    std::vector<std::string> polarity;
    if (positive) polarity.push_back(out.taxonomy.sentiment[0]);
    if (negative) polarity.push_back(out.taxonomy.sentiment[1]);
    doc.sentiment = std::move(polarity);
    out.documents.push_back(std::move(doc));
  }

  // One centroid per cluster plus one shared by the filler words and ".".
  const int D = spec.embedding_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));
  Rng vec_rng(mix_seed(spec.seed, 0xE4B));
  auto random_direction = [&] {
    std::vector<double> v(static_cast<std::size_t>(D));
    for (auto& x : v) x = vec_rng.normal() * inv_sqrt_d;
    return v;
  };
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  auto emit_cluster = [&](const std::vector<std::string>& words, double scale) {
    const auto centroid = random_direction();
    for (const auto& word : words) {
      std::vector<double> v(static_cast<std::size_t>(D));
      for (std::size_t j = 0; j < v.size(); ++j)
        v[j] = scale * (centroid[j] + spec.cluster_spread * vec_rng.normal() * inv_sqrt_d);
      rows.emplace_back(word, std::move(v));
    }
  };
  for (const auto& cluster : out.clusters) emit_cluster(cluster, 1.0);
  auto filler_and_stop = filler;
  filler_and_stop.push_back(".");
  emit_cluster(filler_and_stop, 0.3);

  out.embedding_vectors = RowMatrix(static_cast<Eigen::Index>(rows.size()), D);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.embedding_tokens.push_back(rows[i].first);
    for (int j = 0; j < D; ++j)
      out.embedding_vectors(static_cast<Eigen::Index>(i), j) = rows[i].second[static_cast<std::size_t>(j)];
  }
  return out;
}

}  // namespace activelabel
