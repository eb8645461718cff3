#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tide {

enum class ErrorCode {
  OutOfRange,
  BadShape,
  ChannelMismatch,
  ConfigMismatch,
  CountMismatch,
  TooSmall,
  EmptyDataset,
  ShapeMismatch,
  PhaseMismatch,
  MissingPair,
  UnreadableImage,
  UnsupportedMetric,
  UnknownMethod,
  BadParams,
  IOFailure,
  CorruptCheckpoint,
  Usage,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal conditions (degenerate fusion maps, zero hypotheses) are reported
// here and to stderr. The buffer is per thread so tests can inspect it.
enum class Warning { DegenerateMaps, ZeroVector, CroppedInput };

std::string_view to_string(Warning w);
void warn(Warning w, const std::string& detail);
std::vector<Warning>& warnings();
void set_warnings_quiet(bool quiet);

}  // namespace tide
