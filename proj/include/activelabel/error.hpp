#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace activelabel {

enum class ErrorCode {
  EmptyText,
  InvalidText,
  EmptyCorpus,
  FormatError,
  EmptySequence,
  NumericError,
  ShapeError,
  EmptyPool,
  PoolExhausted,
  ConfigError,
  IngestError,
  TaxonomyError,
  NotFound,
  Conflict,
  Busy,
  NoRoundsYet,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::InvalidText: return "InvalidText";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::NumericError: return "NumericError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IngestError: return "IngestError";
    case ErrorCode::TaxonomyError: return "TaxonomyError";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::NoRoundsYet: return "NoRoundsYet";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. `line()` is 1-based and 0 when the
/// error is not tied to a position in an input file.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail, std::size_t line = 0)
      : std::runtime_error(format(code, detail, line)),
        code_(code),
        detail_(detail),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& detail,
                            std::size_t line) {
    std::string out(to_string(code));
    if (line > 0) out += " at line " + std::to_string(line);
    out += ": ";
    out += detail;
    return out;
  }

  ErrorCode code_;
  std::string detail_;
  std::size_t line_;
};

}  // namespace activelabel
