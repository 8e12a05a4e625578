#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "activelabel/error.hpp"
#include "activelabel/labels.hpp"

namespace activelabel {

/// True positive, false positive and false negative counts summed over every
/// class of every sample.
struct ConfusionTotals {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  ConfusionTotals& operator+=(const ConfusionTotals& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend ConfusionTotals operator+(ConfusionTotals a, const ConfusionTotals& b) { return a += b; }
  bool operator==(const ConfusionTotals&) const = default;
};

struct EvalReport {
  double micro_precision = 0;
  double micro_recall = 0;
  double micro_f1 = 0;
  ConfusionTotals totals;
  std::size_t n_samples = 0;

  bool operator==(const EvalReport&) const = default;
};

inline constexpr double kDefaultThreshold = 0.5;

/// Class i is on iff its probability reaches `threshold`. With `force_top1`
/// an empty result turns on the most probable class (lowest index on ties).
inline LabelVector binarize(std::span<const double> pred, double threshold = kDefaultThreshold,
                            bool force_top1 = false) {
  LabelVector out(pred.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= threshold) {
      out[i] = 1;
      any = true;
    }
  }
  if (force_top1 && !any && !pred.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pred.size(); ++i)
      if (pred[i] > pred[best]) best = i;
    out[best] = 1;
  }
  return out;
}

inline ConfusionTotals accumulate(std::span<const LabelVector> preds, std::span<const LabelVector> golds) {
  if (preds.size() != golds.size())
    throw Error(ErrorCode::ShapeError, std::to_string(preds.size()) + " predictions for " +
                                           std::to_string(golds.size()) + " gold labels");
  ConfusionTotals totals;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& p = preds[s];
    const auto& g = golds[s];
    if (p.size() != g.size())
      throw Error(ErrorCode::ShapeError, "sample " + std::to_string(s) + " has mismatched class counts");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool on = p[i] != 0;
      const bool gold = g[i] != 0;
      totals.tp += on && gold;
      totals.fp += on && !gold;
      totals.fn += !on && gold;
    }
  }
  return totals;
}

/// Micro precision, recall and F1. A zero denominator gives precision (or
/// recall) 1; F1 is 0 when precision + recall is 0.
inline EvalReport micro_scores(const ConfusionTotals& totals, std::size_t n_samples = 0) {
  EvalReport r;
  r.totals = totals;
  r.n_samples = n_samples;
  const auto tp = static_cast<double>(totals.tp);
  r.micro_precision = totals.tp + totals.fp == 0 ? 1.0 : tp / static_cast<double>(totals.tp + totals.fp);
  r.micro_recall = totals.tp + totals.fn == 0 ? 1.0 : tp / static_cast<double>(totals.tp + totals.fn);
  const double sum = r.micro_precision + r.micro_recall;
  r.micro_f1 = sum == 0 ? 0.0 : 2.0 * r.micro_precision * r.micro_recall / sum;
  return r;
}

/// Binarizes every prediction and scores it against `golds`.
inline EvalReport evaluate(std::span<const PredictionVector> preds, std::span<const LabelVector> golds,
                           double threshold = kDefaultThreshold, bool force_top1 = false) {
  std::vector<LabelVector> binary;
  binary.reserve(preds.size());
  for (const auto& p : preds) binary.push_back(binarize(p, threshold, force_top1));
  return micro_scores(accumulate(binary, golds), preds.size());
}

inline void to_json(nlohmann::json& j, const ConfusionTotals& t) {
  j = nlohmann::json{{"tp", t.tp}, {"fp", t.fp}, {"fn", t.fn}};
}

inline void from_json(const nlohmann::json& j, ConfusionTotals& t) {
  t.tp = j.at("tp").get<std::uint64_t>();
  t.fp = j.at("fp").get<std::uint64_t>();
  t.fn = j.at("fn").get<std::uint64_t>();
}

/// Flat object: the three scores, the totals' counts inline, and n_samples.
inline void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"micro_precision", r.micro_precision},
                     {"micro_recall", r.micro_recall},
                     {"micro_f1", r.micro_f1},
                     {"tp", r.totals.tp},
                     {"fp", r.totals.fp},
                     {"fn", r.totals.fn},
                     {"n_samples", r.n_samples}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
  r.micro_precision = j.at("micro_precision").get<double>();
  r.micro_recall = j.at("micro_recall").get<double>();
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.totals = j.get<ConfusionTotals>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
}

}  // namespace activelabel
