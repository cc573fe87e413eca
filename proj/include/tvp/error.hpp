#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tvp {

enum class ErrorCode {
  invalid_config,
  invalid_region,
  dimension_mismatch,
  empty_mask,
  io_error,
  missing_file,
  duplicate_id,
  split_leakage,
  malformed_manifest,
  empty_corpus,
  length_mismatch,
  sequence_too_long,
  empty_loss_mask,
  non_finite,
  corrupt_checkpoint,
  checkpoint_version,
  vocabulary_mismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tvp
