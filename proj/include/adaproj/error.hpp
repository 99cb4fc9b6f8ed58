#pragma once

#include <stdexcept>
#include <string>

namespace adaproj {

enum class ErrorKind {
  ZeroVector,
  DimensionMismatch,
  RankDeficient,
  InvalidDims,
  EmptyBatch,
  EmptyDataset,
  ConfigInvalid,
  TooShort,
  EmptyInput,
  EmptyClass,
  InvalidP,
  InvalidSpec,
  DataError,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Errors caused by the configuration rather than by the data.
  bool is_config_error() const noexcept {
    return kind_ == ErrorKind::ConfigInvalid || kind_ == ErrorKind::InvalidDims ||
           kind_ == ErrorKind::InvalidSpec || kind_ == ErrorKind::InvalidP;
  }

 private:
  ErrorKind kind_;
};

}  // namespace adaproj
