// data.hpp — per-minute occupant data model: CSV ingest/export, synthetic
// generation with planted signals, feature pooling, scenario masks, and
// sliding windows for the sequence models.
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "seqchoice/linalg.hpp"
#include "seqchoice/timeutil.hpp"

namespace seqchoice {

enum class ResourceKind { CeilingLight = 0, DeskLight = 1, CeilingFan = 2, AirCon = 3 };
constexpr int kNumResources = 4;

// Serialization order is the enum order; these names prefix the CSV columns.
const char* resource_name(ResourceKind r);
ResourceKind resource_from_name(std::string_view name);
constexpr std::array<ResourceKind, 4> all_resources() {
  return {ResourceKind::CeilingLight, ResourceKind::DeskLight, ResourceKind::CeilingFan,
          ResourceKind::AirCon};
}

struct OccupantRecord {
  Minute minute = 0;
  std::string occupant_id;
  std::array<int, kNumResources> status{};            // 0/1 at this minute
  std::array<double, kNumResources> usage_today{};    // on-minutes since local midnight,
                                                      // excluding the current minute
  std::array<std::optional<double>, kNumResources> baseline;  // minutes > 0 when present
  double points_game = 0.0;
  double points_survey = 0.0;
  std::optional<int> rank;
  int portal_visits = 0;
  std::optional<double> ext_temp_c, ext_humidity_pct, ext_solar_wm2;
  std::optional<double> room_temp_c, room_humidity_pct;
};

// Canonical order: occupant_id ascending, minute strictly ascending within an
// occupant. parse_dataset sorts into this order before validating.
struct Dataset {
  std::vector<OccupantRecord> records;

  // Contiguous [begin, end) record ranges per occupant, in record order.
  std::vector<std::pair<std::size_t, std::size_t>> occupant_spans() const;
  std::vector<std::string> occupant_ids() const;
  bool empty() const { return records.empty(); }
};

extern const std::vector<std::string> kDatasetHeader;

Dataset parse_dataset(const std::string& path);
Dataset parse_dataset_text(const std::string& text, const std::string& origin);
std::string write_dataset_text(const Dataset& ds);
void write_dataset(const Dataset& ds, const std::string& path);

// ---------------------------------------------------------------------------
// Calendar configuration: named date ranges (holidays, exams, breaks)
// read from a `name,start_date,end_date` text file; one feature dummy per
// distinct name.
struct CalendarConfig {
  struct Range {
    std::string name;
    std::int64_t start_day;  // inclusive
    std::int64_t end_day;    // inclusive
  };
  std::vector<Range> ranges;

  static CalendarConfig load(const std::string& path);
  static CalendarConfig parse_text(const std::string& text, const std::string& origin);
  std::vector<std::string> names() const;  // distinct, in first-appearance order
  bool contains(const std::string& name, std::int64_t day) const;
};

// ---------------------------------------------------------------------------
// Synthetic datasets with planted signals.

enum class PlantedSignal {
  Memoryless,    // target status = [feature > threshold]
  MarkovOrder2,  // target status copies its lag-2 value with prob `persistence`
  WeatherOnly,   // target status = [ext_temp_c > threshold]
};

struct SynthConfig {
  int occupants = 2;
  int days = 14;
  PlantedSignal signal = PlantedSignal::Memoryless;
  std::string feature = "ext_humidity_pct";  // Memoryless driver column
  double threshold = 70.0;
  double persistence = 0.95;  // MarkovOrder2 only
  double noise_flip_prob = 0.0;
  std::uint64_t seed = 0;
  std::int64_t start_day = days_from_civil({2017, 9, 12});
  ResourceKind target = ResourceKind::CeilingFan;

  void validate() const;
};

Dataset synth_generate(const SynthConfig& config);

// ---------------------------------------------------------------------------
// Feature pooling.

enum class FeatureKind { Raw, CollegeDummy, SeasonalDummy, PooledContinuous };

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::Raw;
  bool sensor_derived = false;  // true iff computed from IoT readings
};

struct FeatureMatrix {
  std::vector<FeatureDescriptor> descriptors;
  Mat rows;                                         // n x d, no NaN
  std::array<std::vector<int>, kNumResources> labels;  // status at the row's minute
  std::vector<Minute> row_minutes;
  std::vector<int> row_occupants;  // index into occupant_names
  std::vector<std::string> occupant_names;

  std::size_t n_rows() const { return rows.rows; }
  std::size_t n_cols() const { return rows.cols; }
  int column_index(std::string_view name) const;  // -1 if absent
  std::vector<std::string> column_names() const;
};

FeatureMatrix pool_features(const Dataset& ds, const CalendarConfig& calendar);

// Column subset preserving row metadata and labels.
FeatureMatrix select_columns(const FeatureMatrix& fm, const std::vector<std::string>& names);
// Row subset by predicate result, preserving order.
FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& idx);

enum class Scenario { StepAhead, SensorFree };
const char* scenario_name(Scenario s);

FeatureMatrix scenario_filter(const FeatureMatrix& fm, Scenario s);

// ---------------------------------------------------------------------------
// Sliding windows. A window is N consecutive rows of one occupant with
// one-minute steps; its label is the resource label at the final row.
struct WindowedTensor {
  int window_len = 0;
  int stride = 1;
  std::shared_ptr<const FeatureMatrix> source;
  std::vector<std::size_t> window_start;  // row index of each window's first row
  std::vector<int> window_label;

  std::size_t count() const { return window_start.size(); }
  std::size_t dim() const { return source ? source->n_cols() : 0; }
  // Row t (0-based) of window w in the source matrix.
  std::span<const double> step(std::size_t w, int t) const {
    return source->rows.row(window_start[w] + static_cast<std::size_t>(t));
  }
};

WindowedTensor make_windows(std::shared_ptr<const FeatureMatrix> fm, ResourceKind resource,
                            int window_len, int stride = 1);

}  // namespace seqchoice
