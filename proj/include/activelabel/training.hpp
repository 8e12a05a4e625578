#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "activelabel/embedding.hpp"
#include "activelabel/error.hpp"
#include "activelabel/random.hpp"
#include "activelabel/seqmodel.hpp"
#include "activelabel/tokenizer.hpp"
#include "activelabel/vocabulary.hpp"

namespace activelabel {

struct Hyperparams {
  int hidden = 64;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (hidden <= 0 || learning_rate <= 0 || epochs <= 0 || batch_size <= 0 || clip_norm <= 0 ||
        beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || adam_epsilon <= 0)
      throw Error(ErrorCode::ConfigError, "hyperparameters must be positive (Adam betas in (0,1))");
  }

  bool operator==(const Hyperparams&) const = default;
};

template <typename Scalar>
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams<Scalar>& params, const Hyperparams& hyper)
      : hyper_(hyper), first_(params.zeros_like()), second_(params.zeros_like()) {}

  void step(ModelParams<Scalar>& params, const Gradients<Scalar>& grads) {
    ++steps_;
    const double correction1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(steps_));
    const auto b1 = static_cast<Scalar>(hyper_.beta1);
    const auto b2 = static_cast<Scalar>(hyper_.beta2);
    const auto step_size = static_cast<Scalar>(hyper_.learning_rate / correction1);
    const auto sqrt_c2 = static_cast<Scalar>(std::sqrt(correction2));
    const auto eps = static_cast<Scalar>(hyper_.adam_epsilon);

    auto p = params.arrays();
    auto g = grads.arrays();
    auto m = first_.arrays();
    auto v = second_.arrays();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k]->array() = b1 * m[k]->array() + (Scalar(1) - b1) * g[k]->array();
      v[k]->array() = b2 * v[k]->array() + (Scalar(1) - b2) * g[k]->array().square();
      p[k]->array() -= step_size * m[k]->array() / (v[k]->array().sqrt() / sqrt_c2 + eps);
    }
  }

 private:
  Hyperparams hyper_;
  ModelParams<Scalar> first_;
  ModelParams<Scalar> second_;
  long steps_ = 0;
};

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
template <typename Scalar>
double clip_gradients(Gradients<Scalar>& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) {
    const auto scale = static_cast<Scalar>(max_norm / norm);
    for (auto* m : grads.arrays()) *m *= scale;
  }
  return norm;
}

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;
  std::vector<double> epoch_losses;  // example-weighted mean loss per epoch
};

/// Mini-batch Adam from a fresh seeded initialization. `table` is the D x V
/// embedding; with `train_embedding` a copy of it is learned jointly,
/// otherwise it stays untouched.
template <typename Scalar>
TrainResult<Scalar> train_tokens(std::span<const TokenExample> data, const Hyperparams& hyper,
                                 const Mat<Scalar>& table, bool train_embedding) {
  if (data.empty()) throw Error(ErrorCode::EmptyPool, "no labeled examples to train on");
  hyper.validate();
  const std::size_t classes = data.front().label.size();
  for (const auto& ex : data) {
    if (ex.label.size() != classes) throw Error(ErrorCode::ShapeError, "labels disagree on class count");
    if (ex.ids.empty()) throw Error(ErrorCode::EmptySequence, "training sequence has no tokens");
  }
  if (classes == 0) throw Error(ErrorCode::ShapeError, "labels have no classes");

  TrainResult<Scalar> result;
  ModelParams<Scalar>& params = result.params;
  params = init_params<Scalar>(table.rows(), hyper.hidden, static_cast<Eigen::Index>(classes), hyper.seed);
  if (train_embedding) params.embedding = table;
  AdamOptimizer<Scalar> adam(params, hyper);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(hyper.seed, 0x5AFF1E));
  const auto batch_size = static_cast<std::size_t>(hyper.batch_size);
  std::vector<const TokenExample*> batch;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&data[order[i]]);
      auto [loss, grads] = backward_tokens<Scalar>(params, train_embedding ? nullptr : &table, batch);
      epoch_loss += loss * static_cast<double>(batch.size());
      clip_gradients(grads, hyper.clip_norm);
      adam.step(params, grads);
    }
    if (!params.all_finite()) throw Error(ErrorCode::NumericError, "parameters diverged");
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return result;
}

/// D x V view of an embedding table in the model's precision.
template <typename Scalar>
Mat<Scalar> embedding_columns(const EmbeddingTable& table) {
  return table.vectors.transpose().template cast<Scalar>();
}

inline std::vector<TokenExample> encode_examples(std::span<const std::pair<TokenSequence, LabelVector>> labeled,
                                                 const Vocabulary& vocab) {
  std::vector<TokenExample> out;
  out.reserve(labeled.size());
  for (const auto& [seq, label] : labeled) out.push_back({vocab.encode(seq), label});
  return out;
}

/// Trains on tokenized documents. Trainable tables are learned inside the
/// returned parameters; frozen ones are never modified.
template <typename Scalar = float>
ModelParams<Scalar> train(std::span<const std::pair<TokenSequence, LabelVector>> labeled, const Hyperparams& hyper,
                          const EmbeddingTable& table, const Vocabulary& vocab) {
  if (labeled.empty()) throw Error(ErrorCode::EmptyPool, "no labeled examples to train on");
  if (static_cast<std::size_t>(table.rows()) != vocab.size())
    throw Error(ErrorCode::ShapeError, "embedding rows do not match vocabulary size");
  const auto examples = encode_examples(labeled, vocab);
  return train_tokens<Scalar>(examples, hyper, embedding_columns<Scalar>(table), !table.frozen()).params;
}

/// A trained model bundled with what it needs to read text: vocabulary,
/// embedding (frozen table, or the learned one inside `params`) and settings.
template <typename Scalar = float>
struct Classifier {
  Hyperparams hyper;
  std::shared_ptr<const Vocabulary> vocab;
  EmbeddingMode embedding_mode = EmbeddingMode::FrozenPretrained;
  std::shared_ptr<const Mat<Scalar>> frozen_table;  // D x V, frozen mode only
  ModelParams<Scalar> params;
  std::size_t max_seq_len = kDefaultMaxSeqLen;

  const Mat<Scalar>& table() const { return params.trains_embedding() ? params.embedding : *frozen_table; }
  std::size_t classes() const { return static_cast<std::size_t>(params.classes()); }

  std::vector<PredictionVector> predict(std::span<const std::vector<TokenId>* const> seqs) const {
    return forward_tokens<Scalar>(params, table(), seqs);
  }

  std::vector<PredictionVector> predict(std::span<const std::vector<TokenId>> seqs) const {
    std::vector<const std::vector<TokenId>*> ptrs;
    ptrs.reserve(seqs.size());
    for (const auto& s : seqs) ptrs.push_back(&s);
    return predict(std::span<const std::vector<TokenId>* const>(ptrs));
  }

  PredictionVector predict(const TokenSequence& seq) const {
    const auto ids = vocab->encode(seq);
    std::array<const std::vector<TokenId>*, 1> one{&ids};
    return predict(std::span<const std::vector<TokenId>* const>(one)).front();
  }
};

/// Shared inputs for training classifiers over one corpus.
template <typename Scalar = float>
struct EmbeddingContext {
  std::shared_ptr<const Vocabulary> vocab;
  EmbeddingMode mode = EmbeddingMode::FrozenPretrained;
  std::shared_ptr<const Mat<Scalar>> table;  // D x V initial or frozen table
  std::size_t max_seq_len = kDefaultMaxSeqLen;

  static EmbeddingContext from_table(std::shared_ptr<const Vocabulary> vocab, const EmbeddingTable& t,
                                     std::size_t max_seq_len = kDefaultMaxSeqLen) {
    EmbeddingContext ctx;
    ctx.vocab = std::move(vocab);
    ctx.mode = t.mode;
    ctx.table = std::make_shared<const Mat<Scalar>>(embedding_columns<Scalar>(t));
    ctx.max_seq_len = max_seq_len;
    return ctx;
  }
};

template <typename Scalar = float>
Classifier<Scalar> train_classifier(std::span<const TokenExample> data, const Hyperparams& hyper,
                                    const EmbeddingContext<Scalar>& ctx) {
  Classifier<Scalar> out;
  out.hyper = hyper;
  out.vocab = ctx.vocab;
  out.embedding_mode = ctx.mode;
  out.max_seq_len = ctx.max_seq_len;
  const bool trainable = ctx.mode == EmbeddingMode::Trainable;
  if (!trainable) out.frozen_table = ctx.table;
  out.params = train_tokens<Scalar>(data, hyper, *ctx.table, trainable).params;
  return out;
}

}  // namespace activelabel
