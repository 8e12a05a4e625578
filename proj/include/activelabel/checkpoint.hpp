#pragma once

// Binary checkpoint: magic, format version, scalar width, a JSON metadata
// block (hyperparameters, vocabulary, embedding mode) and named raw arrays.
// Arrays are written column-major in host byte order, so a load restores the
// exact bits that were saved.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "activelabel/error.hpp"
#include "activelabel/training.hpp"

namespace activelabel {

inline constexpr char kCheckpointMagic[8] = {'A', 'L', 'C', 'K', 'P', 'T', '\0', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + std::string(where));
  }
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
  j = nlohmann::json{{"hidden", h.hidden},       {"learning_rate", h.learning_rate},
                     {"epochs", h.epochs},       {"batch_size", h.batch_size},
                     {"seed", h.seed},           {"clip_norm", h.clip_norm},
                     {"beta1", h.beta1},         {"beta2", h.beta2},
                     {"adam_epsilon", h.adam_epsilon}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, Hyperparams& h) {
  detail::reject_unknown_keys(j, {"hidden", "learning_rate", "epochs", "batch_size", "seed", "clip_norm", "beta1",
                                  "beta2", "adam_epsilon"},
                              "hyper");
  h.hidden = j.value("hidden", h.hidden);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.seed = j.value("seed", h.seed);
  h.clip_norm = j.value("clip_norm", h.clip_norm);
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.adam_epsilon = j.value("adam_epsilon", h.adam_epsilon);
}

namespace detail {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::FormatError, "truncated checkpoint");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t limit = 1ULL << 32) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > limit) throw Error(ErrorCode::FormatError, "implausible string length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorCode::FormatError, "truncated checkpoint");
  return s;
}

template <typename Scalar>
void write_array(std::ostream& out, const std::string& name, const Mat<Scalar>& m) {
  write_string(out, name);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
}

template <typename Scalar>
Mat<Scalar> read_array_body(std::istream& in) {
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  if (rows > (1u << 24) || cols > (1u << 24)) throw Error(ErrorCode::FormatError, "implausible array shape");
  Mat<Scalar> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
  if (!in) throw Error(ErrorCode::FormatError, "truncated checkpoint array");
  return m;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(std::ostream& out, const Classifier<Scalar>& model) {
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_pod<std::uint32_t>(out, kCheckpointVersion);
  detail::write_pod<std::uint32_t>(out, sizeof(Scalar));
  nlohmann::json meta{{"hyper", model.hyper},
                      {"embedding_mode", std::string(to_string(model.embedding_mode))},
                      {"max_seq_len", model.max_seq_len},
                      {"vocabulary", model.vocab ? model.vocab->tokens() : std::vector<std::string>{}}};
  detail::write_string(out, meta.dump());

  std::map<std::string, const Mat<Scalar>*> arrays;
  model.params.visit([&](const std::string& name, const Mat<Scalar>& m) { arrays[name] = &m; });
  if (!model.params.trains_embedding() && model.frozen_table) arrays["frozen_embedding"] = model.frozen_table.get();
  detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& [name, m] : arrays) detail::write_array(out, name, *m);
  if (!out) throw Error(ErrorCode::IoError, "failed writing checkpoint");
}

template <typename Scalar>
Classifier<Scalar> load_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw Error(ErrorCode::FormatError, "not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::FormatError, "unsupported checkpoint version " + std::to_string(version));
  if (detail::read_pod<std::uint32_t>(in) != sizeof(Scalar))
    throw Error(ErrorCode::FormatError, "checkpoint precision does not match");

  Classifier<Scalar> model;
  try {
    const auto meta = nlohmann::json::parse(detail::read_string(in));
    model.hyper = meta.at("hyper").get<Hyperparams>();
    model.embedding_mode = meta.at("embedding_mode").get<std::string>() == "trainable"
                               ? EmbeddingMode::Trainable
                               : EmbeddingMode::FrozenPretrained;
    model.max_seq_len = meta.at("max_seq_len").get<std::size_t>();
    auto tokens = meta.at("vocabulary").get<std::vector<std::string>>();
    if (tokens.size() < 2) throw Error(ErrorCode::FormatError, "checkpoint vocabulary lacks special tokens");
    model.vocab = std::make_shared<const Vocabulary>(std::vector<std::string>(tokens.begin() + 2, tokens.end()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("bad checkpoint metadata: ") + e.what());
  }

  std::map<std::string, Mat<Scalar>> arrays;
  const auto count = detail::read_pod<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    auto name = detail::read_string(in, 256);
    arrays[name] = detail::read_array_body<Scalar>(in);
  }
  auto take = [&](const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw Error(ErrorCode::FormatError, "checkpoint is missing array " + name);
    return std::move(it->second);
  };
  if (model.embedding_mode == EmbeddingMode::Trainable) {
    model.params.embedding = take("embedding");
  } else {
    model.frozen_table = std::make_shared<const Mat<Scalar>>(take("frozen_embedding"));
  }
  for (std::size_t l = 0; l < kLstmLayers; ++l) {
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    model.params.lstm[l].input_weights = take(prefix + "input_weights");
    model.params.lstm[l].recurrent_weights = take(prefix + "recurrent_weights");
    model.params.lstm[l].bias = take(prefix + "bias");
  }
  model.params.head_weights = take("head.weights");
  model.params.head_bias = take("head.bias");

  const auto H = model.params.hidden();
  const auto& table = model.table();
  bool ok = table.cols() == static_cast<Eigen::Index>(model.vocab->size()) &&
            model.params.input_dim() == table.rows() && model.params.head_weights.cols() == H &&
            model.params.head_bias.rows() == model.params.classes();
  for (std::size_t l = 0; l < kLstmLayers; ++l) {
    const auto& layer = model.params.lstm[l];
    ok = ok && layer.recurrent_weights.rows() == 4 * H && layer.recurrent_weights.cols() == H &&
         layer.input_weights.rows() == 4 * H && layer.bias.rows() == 4 * H && layer.bias.cols() == 1 &&
         (l == 0 || layer.input_weights.cols() == H);
  }
  if (!ok) throw Error(ErrorCode::FormatError, "checkpoint arrays have inconsistent shapes");
  if (!model.params.all_finite()) throw Error(ErrorCode::FormatError, "checkpoint holds non-finite values");
  return model;
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const Classifier<Scalar>& model) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    save_checkpoint(out, model);
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
Classifier<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  return load_checkpoint<Scalar>(in);
}

}  // namespace activelabel
