#include "adaproj/error.hpp"

namespace adaproj {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::InvalidP: return "InvalidP";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::DataError: return "DataError";
  }
  return "Unknown";
}

}  // namespace adaproj
