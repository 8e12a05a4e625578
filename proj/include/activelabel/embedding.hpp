#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "activelabel/error.hpp"
#include "activelabel/random.hpp"
#include "activelabel/tokenizer.hpp"
#include "activelabel/vocabulary.hpp"

namespace activelabel {

enum class EmbeddingMode { FrozenPretrained, Trainable };

inline std::string_view to_string(EmbeddingMode mode) {
  return mode == EmbeddingMode::FrozenPretrained ? "frozen_pretrained" : "trainable";
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// V x D token vectors. Row `Vocabulary::kPad` is all zero.
struct EmbeddingTable {
  RowMatrix vectors;
  EmbeddingMode mode = EmbeddingMode::Trainable;

  Eigen::Index rows() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
  bool frozen() const { return mode == EmbeddingMode::FrozenPretrained; }

  bool operator==(const EmbeddingTable& other) const {
    return mode == other.mode && vectors.rows() == other.vectors.rows() &&
           vectors.cols() == other.vectors.cols() && vectors == other.vectors;
  }
};

inline constexpr double kEmbeddingInitRange = 0.05;

namespace detail {

inline void init_row(RowMatrix& m, Eigen::Index row, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    m(row, j) = rng.uniform(-kEmbeddingInitRange, kEmbeddingInitRange);
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    fields.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

/// Trainable table with every row except PAD drawn uniformly from
/// [-0.05, 0.05].
inline EmbeddingTable random_embedding(std::size_t vocab_size, Eigen::Index dim, std::uint64_t seed) {
  if (dim <= 0) throw Error(ErrorCode::ConfigError, "embedding dimension must be positive");
  EmbeddingTable table;
  table.mode = EmbeddingMode::Trainable;
  table.vectors = RowMatrix::Zero(static_cast<Eigen::Index>(vocab_size), dim);
  Rng rng(mix_seed(seed, 0xE3B));
  for (Eigen::Index r = 0; r < table.vectors.rows(); ++r)
    if (r != Vocabulary::kPad) detail::init_row(table.vectors, r, rng);
  return table;
}

/// Reads word2vec-style text vectors from a stream. Tokens of `vocab` that are
/// absent from the file, and UNK, get seeded random rows.
inline EmbeddingTable load_pretrained(std::istream& in, const Vocabulary& vocab, std::uint64_t seed = 0) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw Error(ErrorCode::FormatError, "missing header", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_spaces(line);
  std::size_t count = 0;
  long long dim = 0;
  if (header.size() != 2 || !detail::parse_number(header[0], count) ||
      !detail::parse_number(header[1], dim) || dim <= 0)
    throw Error(ErrorCode::FormatError, "header must be '<count> <dim>' with dim > 0", line_no);

  EmbeddingTable table;
  table.mode = EmbeddingMode::FrozenPretrained;
  table.vectors = RowMatrix::Zero(static_cast<Eigen::Index>(vocab.size()), dim);
  std::vector<bool> found(vocab.size(), false);
  std::vector<double> values(static_cast<std::size_t>(dim));

  std::size_t rows_read = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_spaces(line);
    if (fields.size() != static_cast<std::size_t>(dim) + 1)
      throw Error(ErrorCode::FormatError,
                  "expected " + std::to_string(dim) + " values, found " +
                      std::to_string(fields.empty() ? 0 : fields.size() - 1),
                  line_no);
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (!detail::parse_number(fields[j + 1], values[j]) || !std::isfinite(values[j]))
        throw Error(ErrorCode::FormatError, "bad value '" + std::string(fields[j + 1]) + "'", line_no);
    }
    ++rows_read;
    const std::string token(fields[0]);
    if (!vocab.contains(token)) continue;
    const TokenId id = vocab.index(token);
    if (id == Vocabulary::kPad || id == Vocabulary::kUnk) continue;
    for (std::size_t j = 0; j < values.size(); ++j)
      table.vectors(id, static_cast<Eigen::Index>(j)) = values[j];
    found[static_cast<std::size_t>(id)] = true;
  }
  if (rows_read != count)
    throw Error(ErrorCode::FormatError,
                "header declares " + std::to_string(count) + " vectors, file has " +
                    std::to_string(rows_read),
                line_no);

  Rng rng(mix_seed(seed, 0xE3B));
  for (std::size_t id = 0; id < vocab.size(); ++id)
    if (id != static_cast<std::size_t>(Vocabulary::kPad) && !found[id])
      detail::init_row(table.vectors, static_cast<Eigen::Index>(id), rng);
  return table;
}

inline EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab,
                                      std::uint64_t seed = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open embedding file " + path);
  return load_pretrained(in, vocab, seed);
}

/// Writes vectors in the same text format `load_pretrained` reads.
inline void write_embedding_text(std::ostream& out, const std::vector<std::string>& tokens,
                                 const RowMatrix& vectors) {
  out << tokens.size() << ' ' << vectors.cols() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out << tokens[i];
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, vectors(static_cast<Eigen::Index>(i), j));
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

/// Row t of the result is the vector of token t (UNK for unseen tokens).
inline Eigen::MatrixXd lookup(const TokenSequence& seq, const EmbeddingTable& table, const Vocabulary& vocab) {
  if (seq.tokens.empty()) throw Error(ErrorCode::EmptySequence, "cannot embed an empty sequence");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(seq.size()), table.dim());
  for (std::size_t t = 0; t < seq.size(); ++t)
    out.row(static_cast<Eigen::Index>(t)) = table.vectors.row(vocab.index(seq.tokens[t]));
  return out;
}

}  // namespace activelabel
