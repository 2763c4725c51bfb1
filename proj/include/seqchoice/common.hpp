// common.hpp — error codes, shared exception type, string and number helpers.
#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqchoice {

enum class Errc {
  // data
  MissingColumn,
  BadValue,
  NonMonotonicTimestamp,
  EmptyFile,
  InvalidConfig,
  EmptyDataset,
  NoFeaturesLeft,
  WindowTooLong,
  // points
  InsufficientHistory,
  NonPositiveBaseline,
  NotEnoughParticipants,
  // prep
  TooFewRows,
  LengthMismatch,
  KTooLarge,
  TooFewMinority,
  // models
  DimensionMismatch,
  SingleClass,
  DegenerateCovariance,
  ShapeMismatch,
  BatchTooSmall,
  Diverged,
  EmptyValidation,
  WrongWindowLength,
  // generative
  EmptySeries,
  UntrainedModel,
  // game
  SchemaMismatch,
  StreamTooShort,
  // stats
  NonPositiveBefore,
  TooFewItems,
  DegenerateSample,
  // cli / io
  IoError,
  UsageError,
};

const char* errc_name(Errc c);

// Single exception type across the library. `code()` maps to the CLI's
// machine-parsable "ERROR <code>:" prefix and its exit codes.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

// Shortest decimal representation that round-trips the exact double.
// All file output goes through this so repeated runs are byte-identical.
std::string format_double(double v);

// Strict double/int parsing; the whole field must be consumed.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

std::vector<std::string> split_csv_line(std::string_view line);
std::string trim(std::string_view s);

// FNV-1a, used to derive per-task RNG streams from a root seed.
std::uint64_t fnv1a(std::string_view s);

}  // namespace seqchoice
