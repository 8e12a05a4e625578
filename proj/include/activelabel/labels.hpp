#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "activelabel/error.hpp"

namespace activelabel {

/// Per-class binary targets, one entry per taxonomy class.
using LabelVector = std::vector<std::uint8_t>;
/// Per-class sigmoid outputs, each strictly inside (0, 1).
using PredictionVector = std::vector<double>;

enum class Task { Aspect, Sentiment };

inline constexpr std::array<Task, 2> kAllTasks = {Task::Aspect, Task::Sentiment};

inline std::string_view to_string(Task task) { return task == Task::Aspect ? "aspect" : "sentiment"; }

inline Task parse_task(std::string_view name) {
  if (name == "aspect") return Task::Aspect;
  if (name == "sentiment") return Task::Sentiment;
  throw Error(ErrorCode::ConfigError, "unknown task '" + std::string(name) + "'");
}

inline std::size_t task_index(Task task) { return task == Task::Aspect ? 0 : 1; }

/// Review aspect categories and their collected training / validation counts.
struct ClassCount {
  std::string_view name;
  int training;
  int validation;
};

inline constexpr std::array<ClassCount, 13> kReviewAspects = {{
    {"Internet usage", 330, 67},
    {"Global Management", 2562, 525},
    {"Loyalty", 1078, 203},
    {"Contract", 347, 61},
    {"Financial", 776, 184},
    {"Accessibility", 730, 129},
    {"Reception", 959, 237},
    {"Empathy", 1144, 184},
    {"Information provided", 1184, 215},
    {"Processing time", 1845, 379},
    {"Visibility", 603, 147},
    {"Expert", 442, 92},
    {"Repairing", 427, 94},
}};

inline constexpr std::array<ClassCount, 2> kReviewSentiments = {{
    {"Positive", 8254, 1664},
    {"Negative", 4173, 853},
}};

inline constexpr int kReviewTrainingInstances = 6929;
inline constexpr int kReviewValidationInstances = 1456;

struct Taxonomy {
  std::vector<std::string> aspects;
  std::vector<std::string> sentiment;

  static Taxonomy reviews() {
    Taxonomy t;
    for (const auto& c : kReviewAspects) t.aspects.emplace_back(c.name);
    for (const auto& c : kReviewSentiments) t.sentiment.emplace_back(c.name);
    return t;
  }

  const std::vector<std::string>& classes(Task task) const {
    return task == Task::Aspect ? aspects : sentiment;
  }

  std::size_t size(Task task) const { return classes(task).size(); }

  LabelVector encode(std::span<const std::string> names, Task task) const {
    const auto& cls = classes(task);
    LabelVector out(cls.size(), 0);
    for (const auto& name : names) {
      auto it = std::find(cls.begin(), cls.end(), name);
      if (it == cls.end())
        throw Error(ErrorCode::TaxonomyError,
                    "unknown " + std::string(to_string(task)) + " label '" + name + "'");
      out[static_cast<std::size_t>(it - cls.begin())] = 1;
    }
    return out;
  }

  std::vector<std::string> decode(const LabelVector& labels, Task task) const {
    const auto& cls = classes(task);
    if (labels.size() != cls.size())
      throw Error(ErrorCode::ShapeError, "label vector does not match taxonomy");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i]) names.push_back(cls[i]);
    return names;
  }

  void validate() const {
    for (Task task : kAllTasks) {
      const auto& cls = classes(task);
      if (cls.empty())
        throw Error(ErrorCode::ConfigError, "taxonomy has no " + std::string(to_string(task)) + " classes");
      auto sorted = cls;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw Error(ErrorCode::ConfigError, "duplicate class name in taxonomy");
    }
  }

  bool operator==(const Taxonomy&) const = default;
};

}  // namespace activelabel
