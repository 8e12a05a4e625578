#pragma once

// Two-layer LSTM over embedded tokens, last hidden state into a fully
// connected sigmoid head, trained with summed per-class binary cross-entropy.
//
// Batches are left-padded so every sequence ends on the final step. Padded
// steps hold h = c = 0, which makes the first real step of a short sequence
// identical to running it alone.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"
#include "activelabel/random.hpp"
#include "activelabel/vocabulary.hpp"

namespace activelabel {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr std::size_t kLstmLayers = 2;
inline constexpr double kProbabilityClamp = 1e-7;

/// Gate rows are stacked input, forget, cell, output; each block is H rows.
template <typename Scalar>
struct LstmLayer {
  Mat<Scalar> input_weights;      // 4H x In
  Mat<Scalar> recurrent_weights;  // 4H x H
  Mat<Scalar> bias;               // 4H x 1
};

template <typename Scalar>
struct ModelParams {
  std::array<LstmLayer<Scalar>, kLstmLayers> lstm;
  Mat<Scalar> head_weights;  // C x H
  Mat<Scalar> head_bias;     // C x 1
  /// D x V, one column per token. Empty unless the embedding is trained.
  Mat<Scalar> embedding;

  Eigen::Index input_dim() const { return lstm[0].input_weights.cols(); }
  Eigen::Index hidden() const { return lstm[0].recurrent_weights.cols(); }
  Eigen::Index classes() const { return head_weights.rows(); }
  bool trains_embedding() const { return embedding.size() > 0; }

  static ModelParams zeros(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index classes,
                           Eigen::Index trainable_vocab = 0) {
    ModelParams p;
    Eigen::Index in = input_dim;
    for (auto& layer : p.lstm) {
      layer.input_weights = Mat<Scalar>::Zero(4 * hidden, in);
      layer.recurrent_weights = Mat<Scalar>::Zero(4 * hidden, hidden);
      layer.bias = Mat<Scalar>::Zero(4 * hidden, 1);
      in = hidden;
    }
    p.head_weights = Mat<Scalar>::Zero(classes, hidden);
    p.head_bias = Mat<Scalar>::Zero(classes, 1);
    if (trainable_vocab > 0) p.embedding = Mat<Scalar>::Zero(input_dim, trainable_vocab);
    return p;
  }

  /// Same shapes, all zero.
  ModelParams zeros_like() const {
    return zeros(input_dim(), hidden(), classes(), trains_embedding() ? embedding.cols() : 0);
  }

  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t l = 0; l < kLstmLayers; ++l) {
      const std::string prefix = "lstm" + std::to_string(l) + ".";
      fn(prefix + "input_weights", lstm[l].input_weights);
      fn(prefix + "recurrent_weights", lstm[l].recurrent_weights);
      fn(prefix + "bias", lstm[l].bias);
    }
    fn(std::string("head.weights"), head_weights);
    fn(std::string("head.bias"), head_bias);
    if (trains_embedding()) fn(std::string("embedding"), embedding);
  }

  template <typename Fn>
  void visit(Fn&& fn) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const std::string& name, Mat<Scalar>& m) { fn(name, static_cast<const Mat<Scalar>&>(m)); });
  }

  /// Pointers to every array in a fixed order.
  std::vector<Mat<Scalar>*> arrays() {
    std::vector<Mat<Scalar>*> out;
    visit([&](const std::string&, Mat<Scalar>& m) { out.push_back(&m); });
    return out;
  }

  std::vector<const Mat<Scalar>*> arrays() const {
    std::vector<const Mat<Scalar>*> out;
    visit([&](const std::string&, const Mat<Scalar>& m) { out.push_back(&m); });
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](const std::string&, const Mat<Scalar>& m) { ok = ok && m.allFinite(); });
    return ok;
  }

  double squared_norm() const {
    double s = 0;
    visit([&](const std::string&, const Mat<Scalar>& m) { s += static_cast<double>(m.squaredNorm()); });
    return s;
  }

  template <typename To>
  ModelParams<To> cast() const {
    ModelParams<To> out;
    for (std::size_t l = 0; l < kLstmLayers; ++l) {
      out.lstm[l].input_weights = lstm[l].input_weights.template cast<To>();
      out.lstm[l].recurrent_weights = lstm[l].recurrent_weights.template cast<To>();
      out.lstm[l].bias = lstm[l].bias.template cast<To>();
    }
    out.head_weights = head_weights.template cast<To>();
    out.head_bias = head_bias.template cast<To>();
    out.embedding = embedding.template cast<To>();
    return out;
  }

  bool operator==(const ModelParams& other) const {
    auto a = arrays();
    auto b = other.arrays();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
      if (*a[i] != *b[i]) return false;
    }
    return true;
  }
};

/// Gradients share the parameter shape tree.
template <typename Scalar>
using Gradients = ModelParams<Scalar>;

/// Seeded initialization: LSTM and head weights uniform in +-1/sqrt(H), zero
/// biases except the forget gate at 1.
template <typename Scalar>
ModelParams<Scalar> init_params(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index classes,
                                std::uint64_t seed) {
  if (input_dim <= 0 || hidden <= 0 || classes <= 0)
    throw Error(ErrorCode::ShapeError, "model dimensions must be positive");
  auto p = ModelParams<Scalar>::zeros(input_dim, hidden, classes);
  Rng rng(mix_seed(seed, 0x1A57));
  const double range = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto fill = [&](Mat<Scalar>& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-range, range));
  };
  for (auto& layer : p.lstm) {
    fill(layer.input_weights);
    fill(layer.recurrent_weights);
    layer.bias.block(hidden, 0, hidden, 1).setOnes();
  }
  fill(p.head_weights);
  return p;
}

/// An embedded sequence (T x D) with its targets.
template <typename Scalar>
struct Example {
  Mat<Scalar> embedded;
  LabelVector label;
};

/// A token-id sequence with its targets.
struct TokenExample {
  std::vector<TokenId> ids;
  LabelVector label;
};

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Sigmoid kept strictly inside (0, 1); saturated values move one ulp inward.
inline double open_sigmoid(double x) {
  double p = sigmoid(x);
  if (p >= 1.0) p = std::nextafter(1.0, 0.0);
  if (p <= 0.0) p = std::numeric_limits<double>::denorm_min();
  return p;
}

/// Summed binary cross-entropy over classes, probabilities clamped to
/// [1e-7, 1 - 1e-7].
inline double multi_label_loss(std::span<const double> pred, std::span<const std::uint8_t> label) {
  if (pred.size() != label.size())
    throw Error(ErrorCode::ShapeError, "prediction has " + std::to_string(pred.size()) +
                                           " classes, label has " + std::to_string(label.size()));
  double loss = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    loss -= label[i] ? std::log(p) : std::log1p(-p);
  }
  return loss;
}

namespace detail {

template <typename Scalar>
struct PaddedBatch {
  Eigen::Index steps = 0;
  Eigen::Index size = 0;
  std::vector<Mat<Scalar>> inputs;     // per step, D x B
  std::vector<Eigen::Index> starts;    // first real step of each column
  std::vector<std::vector<TokenId>> ids;  // per step, per column; empty for dense input

  bool active(Eigen::Index t, Eigen::Index b) const { return t >= starts[static_cast<std::size_t>(b)]; }
};

template <typename Scalar>
PaddedBatch<Scalar> pad_dense(std::span<const Example<Scalar>> batch) {
  PaddedBatch<Scalar> out;
  out.size = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index dim = batch.front().embedded.cols();
  for (const auto& ex : batch) {
    if (ex.embedded.rows() == 0) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
    if (ex.embedded.cols() != dim) throw Error(ErrorCode::ShapeError, "inconsistent embedding width in batch");
    out.steps = std::max(out.steps, ex.embedded.rows());
  }
  out.inputs.assign(static_cast<std::size_t>(out.steps), Mat<Scalar>::Zero(dim, out.size));
  for (Eigen::Index b = 0; b < out.size; ++b) {
    const auto& x = batch[static_cast<std::size_t>(b)].embedded;
    const Eigen::Index start = out.steps - x.rows();
    out.starts.push_back(start);
    for (Eigen::Index t = 0; t < x.rows(); ++t)
      out.inputs[static_cast<std::size_t>(start + t)].col(b) = x.row(t).transpose();
  }
  return out;
}

template <typename Scalar, typename Seq>
PaddedBatch<Scalar> pad_tokens(std::span<const Seq* const> batch, const Mat<Scalar>& table) {
  PaddedBatch<Scalar> out;
  out.size = static_cast<Eigen::Index>(batch.size());
  for (const Seq* seq : batch) {
    if (seq->empty()) throw Error(ErrorCode::EmptySequence, "sequence has no tokens");
    out.steps = std::max(out.steps, static_cast<Eigen::Index>(seq->size()));
  }
  out.inputs.assign(static_cast<std::size_t>(out.steps), Mat<Scalar>::Zero(table.rows(), out.size));
  out.ids.assign(static_cast<std::size_t>(out.steps), std::vector<TokenId>(batch.size(), Vocabulary::kPad));
  for (Eigen::Index b = 0; b < out.size; ++b) {
    const auto& seq = *batch[static_cast<std::size_t>(b)];
    const Eigen::Index len = static_cast<Eigen::Index>(seq.size());
    const Eigen::Index start = out.steps - len;
    out.starts.push_back(start);
    for (Eigen::Index t = 0; t < len; ++t) {
      TokenId id = seq[static_cast<std::size_t>(t)];
      if (id < 0 || id >= table.cols()) id = Vocabulary::kUnk;
      out.ids[static_cast<std::size_t>(start + t)][static_cast<std::size_t>(b)] = id;
      out.inputs[static_cast<std::size_t>(start + t)].col(b) = table.col(id);
    }
  }
  return out;
}

template <typename Scalar>
struct LayerTrace {
  std::vector<Mat<Scalar>> gates;   // 4H x B, post-activation
  std::vector<Mat<Scalar>> cell;    // H x B
  std::vector<Mat<Scalar>> tanh_cell;
  std::vector<Mat<Scalar>> hidden;  // H x B
};

template <typename Scalar>
void lstm_forward(const LstmLayer<Scalar>& layer, const std::vector<Mat<Scalar>>& inputs,
                  const PaddedBatch<Scalar>& batch, LayerTrace<Scalar>& trace) {
  const Eigen::Index H = layer.recurrent_weights.cols();
  const Eigen::Index B = batch.size;
  const auto T = static_cast<std::size_t>(batch.steps);
  trace.gates.resize(T);
  trace.cell.resize(T);
  trace.tanh_cell.resize(T);
  trace.hidden.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    Mat<Scalar>& z = trace.gates[t];
    z.noalias() = layer.input_weights * inputs[t];
    if (t > 0) z.noalias() += layer.recurrent_weights * trace.hidden[t - 1];
    z.colwise() += layer.bias.col(0);
    auto ifo_sig = [&](Eigen::Index block) {
      auto g = z.middleRows(block * H, H).array();
      g = Scalar(1) / (Scalar(1) + (-g).exp());
    };
    ifo_sig(0);
    ifo_sig(1);
    z.middleRows(2 * H, H).array() = z.middleRows(2 * H, H).array().tanh();
    ifo_sig(3);

    Mat<Scalar>& c = trace.cell[t];
    c = z.middleRows(0, H).cwiseProduct(z.middleRows(2 * H, H));
    if (t > 0) c += z.middleRows(H, H).cwiseProduct(trace.cell[t - 1]);
    for (Eigen::Index b = 0; b < B; ++b)
      if (!batch.active(static_cast<Eigen::Index>(t), b)) c.col(b).setZero();
    trace.tanh_cell[t] = c.array().tanh().matrix();
    trace.hidden[t] = z.middleRows(3 * H, H).cwiseProduct(trace.tanh_cell[t]);
    for (Eigen::Index b = 0; b < B; ++b)
      if (!batch.active(static_cast<Eigen::Index>(t), b)) trace.hidden[t].col(b).setZero();
  }
}

/// Accumulates layer gradients into `grad`; `d_hidden` is the loss gradient
/// reaching each step's output from above. Fills `d_inputs` when non-null.
template <typename Scalar>
void lstm_backward(const LstmLayer<Scalar>& layer, const std::vector<Mat<Scalar>>& inputs,
                   const PaddedBatch<Scalar>& batch, const LayerTrace<Scalar>& trace,
                   const std::vector<Mat<Scalar>>& d_hidden, LstmLayer<Scalar>& grad,
                   std::vector<Mat<Scalar>>* d_inputs) {
  const Eigen::Index H = layer.recurrent_weights.cols();
  const Eigen::Index B = batch.size;
  const auto T = static_cast<std::size_t>(batch.steps);
  Mat<Scalar> dh_next = Mat<Scalar>::Zero(H, B);
  Mat<Scalar> dc_next = Mat<Scalar>::Zero(H, B);
  Mat<Scalar> dz(4 * H, B);
  if (d_inputs) d_inputs->assign(T, Mat<Scalar>());
  for (std::size_t t = T; t-- > 0;) {
    Mat<Scalar> dh = dh_next;
    if (d_hidden[t].size() > 0) dh += d_hidden[t];
    Mat<Scalar> dc = dc_next;
    for (Eigen::Index b = 0; b < B; ++b) {
      if (!batch.active(static_cast<Eigen::Index>(t), b)) {
        dh.col(b).setZero();
        dc.col(b).setZero();
      }
    }
    const Mat<Scalar>& g = trace.gates[t];
    const auto in_gate = g.middleRows(0, H).array();
    const auto forget = g.middleRows(H, H).array();
    const auto cand = g.middleRows(2 * H, H).array();
    const auto out_gate = g.middleRows(3 * H, H).array();
    const auto tc = trace.tanh_cell[t].array();

    dc.array() += dh.array() * out_gate * (Scalar(1) - tc.square());
    dz.middleRows(3 * H, H).array() = dh.array() * tc * out_gate * (Scalar(1) - out_gate);
    dz.middleRows(0, H).array() = dc.array() * cand * in_gate * (Scalar(1) - in_gate);
    dz.middleRows(2 * H, H).array() = dc.array() * in_gate * (Scalar(1) - cand.square());
    if (t > 0) {
      dz.middleRows(H, H).array() = dc.array() * trace.cell[t - 1].array() * forget * (Scalar(1) - forget);
    } else {
      dz.middleRows(H, H).setZero();
    }
    dc_next.array() = dc.array() * forget;

    grad.input_weights.noalias() += dz * inputs[t].transpose();
    grad.bias.col(0) += dz.rowwise().sum();
    if (t > 0) {
      grad.recurrent_weights.noalias() += dz * trace.hidden[t - 1].transpose();
      dh_next.noalias() = layer.recurrent_weights.transpose() * dz;
    }
    if (d_inputs) (*d_inputs)[t].noalias() = layer.input_weights.transpose() * dz;
  }
}

template <typename Scalar>
struct NetworkTrace {
  std::array<LayerTrace<Scalar>, kLstmLayers> layers;
  Mat<double> logits;  // C x B
};

template <typename Scalar>
void network_forward(const ModelParams<Scalar>& params, const PaddedBatch<Scalar>& batch,
                     NetworkTrace<Scalar>& trace) {
  if (batch.steps == 0) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
  if (batch.inputs.front().rows() != params.input_dim())
    throw Error(ErrorCode::ShapeError, "input width " + std::to_string(batch.inputs.front().rows()) +
                                           " does not match model input " +
                                           std::to_string(params.input_dim()));
  lstm_forward(params.lstm[0], batch.inputs, batch, trace.layers[0]);
  for (std::size_t l = 1; l < kLstmLayers; ++l)
    lstm_forward(params.lstm[l], trace.layers[l - 1].hidden, batch, trace.layers[l]);
  Mat<Scalar> z = params.head_weights * trace.layers[kLstmLayers - 1].hidden.back();
  z.colwise() += params.head_bias.col(0);
  trace.logits = z.template cast<double>();
  if (!trace.logits.allFinite()) throw Error(ErrorCode::NumericError, "non-finite logits");
}

template <typename Scalar>
struct BatchGradient {
  double loss = 0;  // mean over the batch
  Gradients<Scalar> grads;
  std::vector<Mat<Scalar>> d_inputs;  // per step, D x B
};

template <typename Scalar>
BatchGradient<Scalar> network_backward(const ModelParams<Scalar>& params, const PaddedBatch<Scalar>& batch,
                                       std::span<const LabelVector* const> labels) {
  NetworkTrace<Scalar> trace;
  network_forward(params, batch, trace);
  const Eigen::Index C = params.classes();
  const Eigen::Index B = batch.size;
  const auto T = static_cast<std::size_t>(batch.steps);

  BatchGradient<Scalar> out;
  out.grads = params.zeros_like();
  Mat<Scalar> d_logits(C, B);
  const double inv_batch = 1.0 / static_cast<double>(B);
  PredictionVector pred(static_cast<std::size_t>(C));
  for (Eigen::Index b = 0; b < B; ++b) {
    const LabelVector& y = *labels[static_cast<std::size_t>(b)];
    if (static_cast<Eigen::Index>(y.size()) != C)
      throw Error(ErrorCode::ShapeError, "label has " + std::to_string(y.size()) + " classes, model has " +
                                             std::to_string(C));
    for (Eigen::Index i = 0; i < C; ++i) {
      pred[static_cast<std::size_t>(i)] = open_sigmoid(trace.logits(i, b));
      d_logits(i, b) = static_cast<Scalar>((pred[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) * inv_batch);
    }
    out.loss += multi_label_loss(pred, y) * inv_batch;
  }

  const Mat<Scalar>& last_hidden = trace.layers[kLstmLayers - 1].hidden.back();
  out.grads.head_weights.noalias() = d_logits * last_hidden.transpose();
  out.grads.head_bias.col(0) = d_logits.rowwise().sum();

  std::vector<Mat<Scalar>> d_hidden(T);
  d_hidden.back().noalias() = params.head_weights.transpose() * d_logits;
  for (std::size_t l = kLstmLayers; l-- > 0;) {
    const auto& inputs = l == 0 ? batch.inputs : trace.layers[l - 1].hidden;
    std::vector<Mat<Scalar>> d_below;
    lstm_backward(params.lstm[l], inputs, batch, trace.layers[l], d_hidden, out.grads.lstm[l], &d_below);
    d_hidden = std::move(d_below);
  }
  out.d_inputs = std::move(d_hidden);
  return out;
}

}  // namespace detail

/// Predictions for one embedded sequence (T x D).
template <typename Scalar>
PredictionVector forward(const ModelParams<Scalar>& params, const Mat<Scalar>& embedded) {
  if (embedded.rows() == 0) throw Error(ErrorCode::EmptySequence, "sequence has no steps");
  std::array<Example<Scalar>, 1> one{{{embedded, {}}}};
  auto batch = detail::pad_dense<Scalar>(one);
  detail::NetworkTrace<Scalar> trace;
  detail::network_forward(params, batch, trace);
  PredictionVector out(static_cast<std::size_t>(trace.logits.rows()));
  for (Eigen::Index i = 0; i < trace.logits.rows(); ++i) out[static_cast<std::size_t>(i)] = open_sigmoid(trace.logits(i, 0));
  return out;
}

/// Predictions for token-id sequences, embedded through `table` (D x V).
template <typename Scalar>
std::vector<PredictionVector> forward_tokens(const ModelParams<Scalar>& params, const Mat<Scalar>& table,
                                             std::span<const std::vector<TokenId>* const> seqs,
                                             std::size_t chunk = 256) {
  std::vector<PredictionVector> out;
  out.reserve(seqs.size());
  detail::NetworkTrace<Scalar> trace;
  for (std::size_t begin = 0; begin < seqs.size(); begin += chunk) {
    const std::size_t n = std::min(chunk, seqs.size() - begin);
    auto batch = detail::pad_tokens<Scalar, std::vector<TokenId>>(seqs.subspan(begin, n), table);
    detail::network_forward(params, batch, trace);
    for (Eigen::Index b = 0; b < trace.logits.cols(); ++b) {
      PredictionVector p(static_cast<std::size_t>(trace.logits.rows()));
      for (Eigen::Index i = 0; i < trace.logits.rows(); ++i) p[static_cast<std::size_t>(i)] = open_sigmoid(trace.logits(i, b));
      out.push_back(std::move(p));
    }
  }
  return out;
}

template <typename Scalar>
struct BackwardResult {
  double loss = 0;  // mean over the batch
  Gradients<Scalar> grads;
  std::vector<Mat<Scalar>> input_grads;  // T x D per example, dense input only
};

/// Mean loss over `batch` and its gradient with respect to every parameter
/// and every input vector.
template <typename Scalar>
BackwardResult<Scalar> backward(const ModelParams<Scalar>& params, std::span<const Example<Scalar>> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyPool, "backward needs at least one example");
  auto padded = detail::pad_dense(batch);
  std::vector<const LabelVector*> labels;
  for (const auto& ex : batch) labels.push_back(&ex.label);
  auto g = detail::network_backward(params, padded, labels);
  if (!g.grads.all_finite()) throw Error(ErrorCode::NumericError, "non-finite gradient");

  BackwardResult<Scalar> out;
  out.loss = g.loss;
  out.grads = std::move(g.grads);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Eigen::Index len = batch[b].embedded.rows();
    const Eigen::Index start = padded.starts[b];
    Mat<Scalar> d(len, params.input_dim());
    for (Eigen::Index t = 0; t < len; ++t)
      d.row(t) = g.d_inputs[static_cast<std::size_t>(start + t)].col(static_cast<Eigen::Index>(b)).transpose();
    out.input_grads.push_back(std::move(d));
  }
  return out;
}

/// Token-level backward. Input gradients are scattered into `grads.embedding`
/// when the model trains its embedding; `frozen_table` (D x V) is used
/// otherwise and receives nothing.
template <typename Scalar>
std::pair<double, Gradients<Scalar>> backward_tokens(const ModelParams<Scalar>& params,
                                                     const Mat<Scalar>* frozen_table,
                                                     std::span<const TokenExample* const> batch) {
  if (batch.empty()) throw Error(ErrorCode::EmptyPool, "backward needs at least one example");
  const Mat<Scalar>& table = params.trains_embedding() ? params.embedding : *frozen_table;
  std::vector<const std::vector<TokenId>*> seqs;
  std::vector<const LabelVector*> labels;
  for (const auto* ex : batch) {
    seqs.push_back(&ex->ids);
    labels.push_back(&ex->label);
  }
  auto padded = detail::pad_tokens<Scalar, std::vector<TokenId>>(seqs, table);
  auto g = detail::network_backward(params, padded, labels);
  if (params.trains_embedding()) {
    for (std::size_t t = 0; t < static_cast<std::size_t>(padded.steps); ++t)
      for (Eigen::Index b = 0; b < padded.size; ++b)
        if (padded.active(static_cast<Eigen::Index>(t), b))
          g.grads.embedding.col(padded.ids[t][static_cast<std::size_t>(b)]) += g.d_inputs[t].col(b);
  }
  if (!g.grads.all_finite()) throw Error(ErrorCode::NumericError, "non-finite gradient");
  return {g.loss, std::move(g.grads)};
}

struct GradientCheckReport {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t entries_checked = 0;
  bool passed = false;
};

/// Relative error floor; entries whose gradient magnitude is below it are
/// compared in absolute terms against it.
inline constexpr double kGradientCheckFloor = 1e-6;

/// Compares analytic gradients with central finite differences for every
/// parameter and every input entry of `sample`.
inline GradientCheckReport gradient_check(const ModelParams<double>& params, const Example<double>& sample,
                                          double tolerance, double step = 1e-5) {
  std::array<Example<double>, 1> batch{sample};
  auto analytic = backward<double>(params, batch);
  auto loss_at = [&](const ModelParams<double>& p, const Example<double>& ex) {
    return multi_label_loss(forward(p, ex.embedded), ex.label);
  };
  GradientCheckReport report;
  auto compare = [&](const std::string& name, double a, double numeric) {
    const double denom = std::max({std::abs(a), std::abs(numeric), kGradientCheckFloor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.entries_checked;
    if (!(rel <= report.max_relative_error)) {
      report.max_relative_error = rel;
      report.worst_parameter = name;
    }
  };

  ModelParams<double> probe = params;
  auto probe_arrays = probe.arrays();
  auto grad_arrays = analytic.grads.arrays();
  std::vector<std::string> names;
  probe.visit([&](const std::string& n, const Mat<double>&) { names.push_back(n); });
  for (std::size_t k = 0; k < probe_arrays.size(); ++k) {
    Mat<double>& m = *probe_arrays[k];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double orig = m(i, j);
        m(i, j) = orig + step;
        const double up = loss_at(probe, sample);
        m(i, j) = orig - step;
        const double down = loss_at(probe, sample);
        m(i, j) = orig;
        compare(names[k], (*grad_arrays[k])(i, j), (up - down) / (2 * step));
      }
    }
  }
  Example<double> shifted = sample;
  for (Eigen::Index t = 0; t < shifted.embedded.rows(); ++t) {
    for (Eigen::Index d = 0; d < shifted.embedded.cols(); ++d) {
      const double orig = shifted.embedded(t, d);
      shifted.embedded(t, d) = orig + step;
      const double up = loss_at(params, shifted);
      shifted.embedded(t, d) = orig - step;
      const double down = loss_at(params, shifted);
      shifted.embedded(t, d) = orig;
      compare("input", analytic.input_grads[0](t, d), (up - down) / (2 * step));
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

struct TinyModelCheck {
  Eigen::Index steps = 0, input_dim = 0, hidden = 0, classes = 0;
  GradientCheckReport report;
};

/// Gradient checks on `count` random models with T, D, H <= 4 and C <= 3.
/// Weights, biases, inputs and targets are all drawn from `seed`.
inline std::vector<TinyModelCheck> check_tiny_models(std::size_t count, std::uint64_t seed,
                                                     double tolerance = 1e-4, double step = 1e-5) {
  Rng rng(mix_seed(seed, 0x6C));
  std::vector<TinyModelCheck> out;
  for (std::size_t k = 0; k < count; ++k) {
    TinyModelCheck c;
    c.steps = rng.between(1, 4);
    c.input_dim = rng.between(1, 4);
    c.hidden = rng.between(1, 4);
    c.classes = rng.between(1, 3);
    auto params = ModelParams<double>::zeros(c.input_dim, c.hidden, c.classes);
    for (auto* m : params.arrays())
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-0.8, 0.8);
    Example<double> ex;
    ex.embedded = Mat<double>(c.steps, c.input_dim);
    for (Eigen::Index i = 0; i < ex.embedded.size(); ++i) ex.embedded.data()[i] = rng.uniform(-1, 1);
    ex.label.resize(static_cast<std::size_t>(c.classes));
    for (auto& y : ex.label) y = rng.bernoulli(0.5) ? 1 : 0;
    c.report = gradient_check(params, ex, tolerance, step);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace activelabel
