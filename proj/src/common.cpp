#include "seqchoice/common.hpp"

#include <array>
#include <cstdio>

namespace seqchoice {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::BadValue: return "BadValue";
    case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::NoFeaturesLeft: return "NoFeaturesLeft";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::NonPositiveBaseline: return "NonPositiveBaseline";
    case Errc::NotEnoughParticipants: return "NotEnoughParticipants";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::TooFewMinority: return "TooFewMinority";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DegenerateCovariance: return "DegenerateCovariance";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::Diverged: return "Diverged";
    case Errc::EmptyValidation: return "EmptyValidation";
    case Errc::WrongWindowLength: return "WrongWindowLength";
    case Errc::EmptySeries: return "EmptySeries";
    case Errc::UntrainedModel: return "UntrainedModel";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::StreamTooShort: return "StreamTooShort";
    case Errc::NonPositiveBefore: return "NonPositiveBefore";
    case Errc::TooFewItems: return "TooFewItems";
    case Errc::DegenerateSample: return "DegenerateSample";
    case Errc::IoError: return "IoError";
    case Errc::UsageError: return "UsageError";
  }
  return "Unknown";
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), p);
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last;
}

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace seqchoice
