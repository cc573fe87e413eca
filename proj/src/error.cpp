#include "tvp/error.hpp"

namespace tvp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "invalid config";
    case ErrorCode::invalid_region: return "invalid region";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::empty_mask: return "empty mask";
    case ErrorCode::io_error: return "io error";
    case ErrorCode::missing_file: return "missing file";
    case ErrorCode::duplicate_id: return "duplicate id";
    case ErrorCode::split_leakage: return "split leakage";
    case ErrorCode::malformed_manifest: return "malformed manifest";
    case ErrorCode::empty_corpus: return "empty corpus";
    case ErrorCode::length_mismatch: return "length mismatch";
    case ErrorCode::sequence_too_long: return "sequence too long";
    case ErrorCode::empty_loss_mask: return "empty loss mask";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::corrupt_checkpoint: return "corrupt checkpoint";
    case ErrorCode::checkpoint_version: return "checkpoint version mismatch";
    case ErrorCode::vocabulary_mismatch: return "vocabulary mismatch";
  }
  return "unknown error";
}

}  // namespace tvp
