#include "tide/error.hpp"

#include <atomic>
#include <iostream>

namespace tide {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::PhaseMismatch: return "PhaseMismatch";
    case ErrorCode::MissingPair: return "MissingPair";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::UnsupportedMetric: return "UnsupportedMetric";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

std::string_view to_string(Warning w) {
  switch (w) {
    case Warning::DegenerateMaps: return "DegenerateMaps";
    case Warning::ZeroVector: return "ZeroVector";
    case Warning::CroppedInput: return "CroppedInput";
  }
  return "Unknown";
}

namespace {
std::atomic<bool> g_quiet{false};
}

std::vector<Warning>& warnings() {
  thread_local std::vector<Warning> buffer;
  return buffer;
}

void set_warnings_quiet(bool quiet) { g_quiet = quiet; }

void warn(Warning w, const std::string& detail) {
  auto& buf = warnings();
  // Bounded so a long training run with a recurring warning cannot grow it forever.
  if (buf.size() < 4096) buf.push_back(w);
  if (!g_quiet) std::cerr << "warning [" << to_string(w) << "]: " << detail << '\n';
}

}  // namespace tide
