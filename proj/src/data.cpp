#include "seqchoice/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "seqchoice/rng.hpp"

namespace seqchoice {

const char* resource_name(ResourceKind r) {
  switch (r) {
    case ResourceKind::CeilingLight: return "ceiling_light";
    case ResourceKind::DeskLight: return "desk_light";
    case ResourceKind::CeilingFan: return "ceiling_fan";
    case ResourceKind::AirCon: return "ac";
  }
  return "?";
}

ResourceKind resource_from_name(std::string_view name) {
  for (ResourceKind r : all_resources()) {
    if (name == resource_name(r)) return r;
  }
  fail(Errc::BadValue, "unknown resource '" + std::string(name) + "'");
}

const std::vector<std::string> kDatasetHeader = {
    "timestamp",
    "occupant_id",
    "ceiling_light_status",
    "desk_light_status",
    "ceiling_fan_status",
    "ac_status",
    "ceiling_light_usage_min",
    "desk_light_usage_min",
    "ceiling_fan_usage_min",
    "ac_usage_min",
    "ceiling_light_baseline_min",
    "desk_light_baseline_min",
    "ceiling_fan_baseline_min",
    "ac_baseline_min",
    "points_game",
    "points_survey",
    "rank",
    "portal_visits",
    "ext_temp_c",
    "ext_humidity_pct",
    "ext_solar_wm2",
    "room_temp_c",
    "room_humidity_pct",
};

std::vector<std::pair<std::size_t, std::size_t>> Dataset::occupant_spans() const {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < records.size()) {
    std::size_t j = i;
    while (j < records.size() && records[j].occupant_id == records[i].occupant_id) ++j;
    spans.emplace_back(i, j);
    i = j;
  }
  return spans;
}

std::vector<std::string> Dataset::occupant_ids() const {
  std::vector<std::string> ids;
  for (auto [b, e] : occupant_spans()) {
    (void)e;
    ids.push_back(records[b].occupant_id);
  }
  return ids;
}

namespace {

[[noreturn]] void bad_row(std::size_t row, const std::string& column, const std::string& what) {
  fail(Errc::BadValue, "row " + std::to_string(row) + " column '" + column + "': " + what);
}

double req_double(const std::string& field, std::size_t row, const std::string& col) {
  double v;
  if (!parse_double(field, v) || !std::isfinite(v)) bad_row(row, col, "expected a number");
  return v;
}

std::optional<double> opt_double(const std::string& field, std::size_t row,
                                 const std::string& col) {
  if (field.empty()) return std::nullopt;
  return req_double(field, row, col);
}

int req_status(const std::string& field, std::size_t row, const std::string& col) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  bad_row(row, col, "expected 0 or 1");
}

std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

Dataset parse_dataset_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::EmptyFile, origin);
  auto header = split_csv_line(line);
  for (const auto& want : kDatasetHeader) {
    if (std::find(header.begin(), header.end(), want) == header.end()) {
      fail(Errc::MissingColumn, want);
    }
  }
  if (header != kDatasetHeader) {
    fail(Errc::BadValue, origin + ": header columns out of order or unknown column present");
  }

  Dataset ds;
  std::vector<std::size_t> src_row;  // 1-based data row, for diagnostics after sorting
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto f = split_csv_line(line);
    if (f.size() != kDatasetHeader.size()) {
      bad_row(row, "*", "expected " + std::to_string(kDatasetHeader.size()) + " fields, got " +
                            std::to_string(f.size()));
    }
    OccupantRecord r;
    r.minute = parse_minute(f[0]);
    r.occupant_id = f[1];
    if (r.occupant_id.empty()) bad_row(row, "occupant_id", "empty");
    for (int k = 0; k < kNumResources; ++k) {
      r.status[k] = req_status(f[2 + k], row, kDatasetHeader[2 + k]);
      r.usage_today[k] = req_double(f[6 + k], row, kDatasetHeader[6 + k]);
      if (r.usage_today[k] < 0) bad_row(row, kDatasetHeader[6 + k], "negative usage");
      if (r.usage_today[k] > minute_of_day(r.minute)) {
        bad_row(row, kDatasetHeader[6 + k], "usage exceeds minutes elapsed since midnight");
      }
      r.baseline[k] = opt_double(f[10 + k], row, kDatasetHeader[10 + k]);
      if (r.baseline[k] && *r.baseline[k] <= 0) {
        bad_row(row, kDatasetHeader[10 + k], "baseline must be > 0");
      }
    }
    r.points_game = req_double(f[14], row, "points_game");
    r.points_survey = req_double(f[15], row, "points_survey");
    if (!f[16].empty()) {
      long long v;
      if (!parse_int(f[16], v) || v <= 0) bad_row(row, "rank", "expected positive integer");
      r.rank = static_cast<int>(v);
    }
    {
      long long v;
      if (!parse_int(f[17], v) || v < 0) bad_row(row, "portal_visits", "expected count >= 0");
      r.portal_visits = static_cast<int>(v);
    }
    r.ext_temp_c = opt_double(f[18], row, "ext_temp_c");
    r.ext_humidity_pct = opt_double(f[19], row, "ext_humidity_pct");
    if (r.ext_humidity_pct && (*r.ext_humidity_pct < 0 || *r.ext_humidity_pct > 100)) {
      bad_row(row, "ext_humidity_pct", "outside [0, 100]");
    }
    r.ext_solar_wm2 = opt_double(f[20], row, "ext_solar_wm2");
    r.room_temp_c = opt_double(f[21], row, "room_temp_c");
    r.room_humidity_pct = opt_double(f[22], row, "room_humidity_pct");
    ds.records.push_back(std::move(r));
    src_row.push_back(row);
  }
  if (ds.records.empty()) fail(Errc::EmptyFile, origin + ": header only");

  // Canonical order, then per-occupant monotonicity and per-day usage checks.
  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = ds.records[a];
    const auto& rb = ds.records[b];
    if (ra.occupant_id != rb.occupant_id) return ra.occupant_id < rb.occupant_id;
    return ra.minute < rb.minute;
  });
  Dataset sorted;
  sorted.records.reserve(ds.records.size());
  std::vector<std::size_t> sorted_src;
  for (std::size_t i : order) {
    sorted.records.push_back(std::move(ds.records[i]));
    sorted_src.push_back(src_row[i]);
  }
  for (std::size_t i = 1; i < sorted.records.size(); ++i) {
    const auto& prev = sorted.records[i - 1];
    const auto& cur = sorted.records[i];
    if (cur.occupant_id != prev.occupant_id) continue;
    if (cur.minute <= prev.minute) {
      fail(Errc::NonMonotonicTimestamp,
           "occupant '" + cur.occupant_id + "' row " + std::to_string(sorted_src[i]));
    }
    if (day_of_minute(cur.minute) == day_of_minute(prev.minute)) {
      for (int k = 0; k < kNumResources; ++k) {
        if (cur.usage_today[k] + 1e-9 < prev.usage_today[k]) {
          bad_row(sorted_src[i], kDatasetHeader[6 + k], "usage decreases within a day");
        }
      }
    }
  }
  return sorted;
}

Dataset parse_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str(), path);
}

std::string write_dataset_text(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < kDatasetHeader.size(); ++i) {
    if (i) out += ',';
    out += kDatasetHeader[i];
  }
  out += '\n';
  for (const auto& r : ds.records) {
    out += format_minute(r.minute);
    out += ',';
    out += r.occupant_id;
    for (int k = 0; k < kNumResources; ++k) out += ',' + std::to_string(r.status[k]);
    for (int k = 0; k < kNumResources; ++k) out += ',' + format_double(r.usage_today[k]);
    for (int k = 0; k < kNumResources; ++k) out += ',' + opt_str(r.baseline[k]);
    out += ',' + format_double(r.points_game);
    out += ',' + format_double(r.points_survey);
    out += ',' + (r.rank ? std::to_string(*r.rank) : std::string());
    out += ',' + std::to_string(r.portal_visits);
    out += ',' + opt_str(r.ext_temp_c);
    out += ',' + opt_str(r.ext_humidity_pct);
    out += ',' + opt_str(r.ext_solar_wm2);
    out += ',' + opt_str(r.room_temp_c);
    out += ',' + opt_str(r.room_humidity_pct);
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write '" + path + "'");
  out << write_dataset_text(ds);
}

// ---------------------------------------------------------------------------

CalendarConfig CalendarConfig::parse_text(const std::string& text, const std::string& origin) {
  CalendarConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto f = split_csv_line(t);
    if (f.size() != 3) {
      fail(Errc::BadValue, origin + ":" + std::to_string(lineno) + ": want name,start,end");
    }
    Range r;
    r.name = trim(f[0]);
    r.start_day = parse_date(trim(f[1]));
    r.end_day = parse_date(trim(f[2]));
    if (r.name.empty() || r.end_day < r.start_day) {
      fail(Errc::BadValue, origin + ":" + std::to_string(lineno) + ": bad range");
    }
    cfg.ranges.push_back(std::move(r));
  }
  return cfg;
}

CalendarConfig CalendarConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

std::vector<std::string> CalendarConfig::names() const {
  std::vector<std::string> out;
  for (const auto& r : ranges) {
    if (std::find(out.begin(), out.end(), r.name) == out.end()) out.push_back(r.name);
  }
  return out;
}

bool CalendarConfig::contains(const std::string& name, std::int64_t day) const {
  for (const auto& r : ranges) {
    if (r.name == name && day >= r.start_day && day <= r.end_day) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Synthetic generation.

void SynthConfig::validate() const {
  if (occupants < 1 || days < 1) fail(Errc::InvalidConfig, "occupants and days must be >= 1");
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob < 0.5)) {
    fail(Errc::InvalidConfig, "noise_flip_prob must be in [0, 0.5)");
  }
  if (!(persistence >= 0.0 && persistence <= 1.0)) {
    fail(Errc::InvalidConfig, "persistence must be in [0, 1]");
  }
  if (signal == PlantedSignal::Memoryless) {
    static const char* drivers[] = {"ext_temp_c", "ext_humidity_pct", "ext_solar_wm2",
                                    "room_temp_c", "room_humidity_pct"};
    bool ok = false;
    for (auto* d : drivers) ok = ok || feature == d;
    if (!ok) fail(Errc::InvalidConfig, "unknown Memoryless driver feature '" + feature + "'");
  }
}

namespace {

struct WeatherSeries {
  std::vector<double> ext_temp, ext_hum, solar, room_temp, room_hum;
};

WeatherSeries make_weather(const SynthConfig& cfg, std::int64_t n_minutes) {
  WeatherSeries w;
  w.ext_temp.resize(n_minutes);
  w.ext_hum.resize(n_minutes);
  w.solar.resize(n_minutes);
  w.room_temp.resize(n_minutes);
  w.room_hum.resize(n_minutes);
  Rng rng(derive_seed(cfg.seed, "synth.weather"));
  double n1 = 0, n2 = 0, n3 = 0;
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (std::int64_t t = 0; t < n_minutes; ++t) {
    int mod = static_cast<int>(t % kMinutesPerDay);
    // AR(1) noise keeps the series smooth; peaks mid-afternoon.
    n1 = 0.98 * n1 + 0.20 * rng.normal();
    n2 = 0.98 * n2 + 0.30 * rng.normal();
    n3 = 0.98 * n3 + 8.0 * rng.normal();
    double phase = std::cos(two_pi * (mod - 870) / 1440.0);
    w.ext_temp[t] = 28.0 + 3.5 * phase + n1;
    w.ext_hum[t] = std::clamp(76.0 - 8.0 * phase + n2, 0.0, 100.0);
    double sun = (mod >= 360 && mod <= 1080)
                     ? 850.0 * std::sin(3.14159265358979323846 * (mod - 360) / 720.0)
                     : 0.0;
    w.solar[t] = std::max(0.0, sun + (sun > 0 ? n3 : 0.0));
    w.room_temp[t] = 0.6 * w.ext_temp[t] + 10.0 + 0.3 * n1;
    w.room_hum[t] = std::clamp(0.7 * w.ext_hum[t] + 18.0 + 0.3 * n2, 0.0, 100.0);
  }
  return w;
}

double driver_value(const WeatherSeries& w, const std::string& feature, std::int64_t t) {
  if (feature == "ext_temp_c") return w.ext_temp[t];
  if (feature == "ext_humidity_pct") return w.ext_hum[t];
  if (feature == "ext_solar_wm2") return w.solar[t];
  if (feature == "room_temp_c") return w.room_temp[t];
  return w.room_hum[t];
}

}  // namespace

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::int64_t n_minutes = static_cast<std::int64_t>(cfg.days) * kMinutesPerDay;
  const Minute start = cfg.start_day * kMinutesPerDay;
  const WeatherSeries weather = make_weather(cfg, n_minutes);
  const int target = static_cast<int>(cfg.target);

  int width = cfg.occupants >= 100 ? 3 : 2;
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.occupants; ++i) {
    std::string num = std::to_string(i + 1);
    while (static_cast<int>(num.size()) < width) num.insert(num.begin(), '0');
    ids.push_back("occ" + num);
  }

  // Pass 1: statuses and per-day points per occupant.
  std::vector<std::vector<std::array<int, kNumResources>>> status(cfg.occupants);
  std::vector<std::array<double, kNumResources>> base_wd(cfg.occupants), base_we(cfg.occupants);
  std::vector<std::vector<double>> day_points(cfg.occupants);  // per completed day
  std::vector<std::vector<double>> survey_points(cfg.occupants);
  std::vector<std::vector<int>> visits(cfg.occupants);  // cumulative per minute

  for (int o = 0; o < cfg.occupants; ++o) {
    Rng rng(derive_seed(cfg.seed, "synth.occupant", static_cast<std::uint64_t>(o)));
    for (int k = 0; k < kNumResources; ++k) {
      base_wd[o][k] = std::floor(rng.uniform(240.0, 600.0));
      base_we[o][k] = std::floor(rng.uniform(180.0, 720.0));
    }
    status[o].resize(n_minutes);
    visits[o].resize(n_minutes);
    int s1 = 0, s2 = 0;  // target lag-1 / lag-2 for MarkovOrder2
    int cum_visits = 0;
    std::array<double, kNumResources> day_usage{};
    for (std::int64_t t = 0; t < n_minutes; ++t) {
      int mod = static_cast<int>(t % kMinutesPerDay);
      bool weekend = is_weekend(start + t);
      std::array<int, kNumResources> s{};
      // Target resource follows the planted signal.
      int base;
      switch (cfg.signal) {
        case PlantedSignal::Memoryless:
          base = driver_value(weather, cfg.feature, t) > cfg.threshold ? 1 : 0;
          break;
        case PlantedSignal::WeatherOnly:
          base = weather.ext_temp[t] > cfg.threshold ? 1 : 0;
          break;
        case PlantedSignal::MarkovOrder2:
          if (t < 2) {
            base = rng.bernoulli(0.5) ? 1 : 0;
          } else {
            base = rng.bernoulli(cfg.persistence) ? s2 : 1 - s2;
          }
          break;
      }
      s2 = s1;
      s1 = base;
      // Non-target resources follow fixed diurnal habits.
      for (int k = 0; k < kNumResources; ++k) {
        int v;
        if (k == target) {
          v = base;
        } else {
          switch (static_cast<ResourceKind>(k)) {
            case ResourceKind::CeilingLight: v = mod >= 19 * 60 ? 1 : 0; break;
            case ResourceKind::DeskLight: v = (!weekend && mod >= 20 * 60 && mod < 23 * 60); break;
            case ResourceKind::CeilingFan: v = weather.room_temp[t] > 26.5 ? 1 : 0; break;
            case ResourceKind::AirCon: v = weather.room_temp[t] > 27.5 ? 1 : 0; break;
            default: v = 0;
          }
        }
        if (rng.bernoulli(cfg.noise_flip_prob)) v = 1 - v;
        s[k] = v;
      }
      status[o][t] = s;
      if (rng.bernoulli(0.002)) ++cum_visits;
      visits[o][t] = cum_visits;
      for (int k = 0; k < kNumResources; ++k) day_usage[k] += s[k];
      if (mod == kMinutesPerDay - 1) {
        double pts = 0.0;
        for (int k = 0; k < kNumResources; ++k) {
          double b = weekend ? base_we[o][k] : base_wd[o][k];
          pts += 100.0 * (b - day_usage[k]) / b;
        }
        day_points[o].push_back(pts);
        survey_points[o].push_back(rng.bernoulli(0.3) ? 5.0 : 0.0);
        day_usage.fill(0.0);
      }
    }
  }

  // Pass 2: daily ranks from cumulative points through the previous midnight.
  std::vector<std::vector<int>> rank_by_day(cfg.days, std::vector<int>(cfg.occupants, 0));
  std::vector<double> cum(cfg.occupants, 0.0);
  for (int d = 0; d < cfg.days; ++d) {
    std::vector<int> order(cfg.occupants);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (cum[a] != cum[b]) return cum[a] > cum[b];
      return ids[a] < ids[b];
    });
    for (int pos = 0; pos < cfg.occupants; ++pos) rank_by_day[d][order[pos]] = pos + 1;
    for (int o = 0; o < cfg.occupants; ++o) {
      cum[o] += day_points[o][d] + survey_points[o][d];
    }
  }

  // Pass 3: records.
  Dataset ds;
  ds.records.reserve(static_cast<std::size_t>(cfg.occupants) * n_minutes);
  for (int o = 0; o < cfg.occupants; ++o) {
    double cum_game = 0.0, cum_survey = 0.0;
    std::array<double, kNumResources> usage{};
    for (std::int64_t t = 0; t < n_minutes; ++t) {
      int mod = static_cast<int>(t % kMinutesPerDay);
      int d = static_cast<int>(t / kMinutesPerDay);
      if (mod == 0) {
        usage.fill(0.0);
        if (d > 0) {
          cum_game += day_points[o][d - 1];
          cum_survey += survey_points[o][d - 1];
        }
      }
      OccupantRecord r;
      r.minute = start + t;
      r.occupant_id = ids[o];
      r.status = status[o][t];
      r.usage_today = usage;
      bool weekend = is_weekend(r.minute);
      for (int k = 0; k < kNumResources; ++k) {
        r.baseline[k] = weekend ? base_we[o][k] : base_wd[o][k];
      }
      r.points_game = cum_game;
      r.points_survey = cum_survey;
      r.rank = rank_by_day[d][o];
      r.portal_visits = visits[o][t];
      r.ext_temp_c = weather.ext_temp[t];
      r.ext_humidity_pct = weather.ext_hum[t];
      r.ext_solar_wm2 = weather.solar[t];
      r.room_temp_c = weather.room_temp[t];
      r.room_humidity_pct = weather.room_hum[t];
      ds.records.push_back(std::move(r));
      for (int k = 0; k < kNumResources; ++k) usage[k] += status[o][t][k];
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Feature pooling.

int FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (descriptors[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) out.push_back(d.name);
  return out;
}

FeatureMatrix pool_features(const Dataset& ds, const CalendarConfig& calendar) {
  if (ds.empty()) fail(Errc::EmptyDataset, "pool_features");

  std::vector<FeatureDescriptor> desc;
  auto add = [&](std::string name, FeatureKind kind, bool sensor) {
    desc.push_back({std::move(name), kind, sensor});
  };
  add("ext_temp_c", FeatureKind::Raw, false);
  add("ext_humidity_pct", FeatureKind::Raw, false);
  add("ext_solar_wm2", FeatureKind::Raw, false);
  add("room_temp_c", FeatureKind::Raw, true);
  add("room_humidity_pct", FeatureKind::Raw, true);
  add("points_game", FeatureKind::Raw, false);
  add("points_survey", FeatureKind::Raw, false);
  add("rank", FeatureKind::Raw, false);
  add("portal_visits", FeatureKind::Raw, false);
  for (ResourceKind r : all_resources()) {
    std::string base = resource_name(r);
    add(base + "_status_prev", FeatureKind::Raw, true);
    add(base + "_usage_prev_min", FeatureKind::Raw, true);
    add(base + "_switches_so_far", FeatureKind::PooledContinuous, true);
    add(base + "_pct_usage_so_far", FeatureKind::PooledContinuous, true);
  }
  add("morning_dummy", FeatureKind::SeasonalDummy, false);
  add("evening_dummy", FeatureKind::SeasonalDummy, false);
  add("weekday_dummy", FeatureKind::SeasonalDummy, false);
  add("weekend_dummy", FeatureKind::SeasonalDummy, false);
  const auto cal_names = calendar.names();
  for (const auto& n : cal_names) add("cal_" + n, FeatureKind::CollegeDummy, false);
  const std::size_t d = desc.size();

  FeatureMatrix fm;
  fm.descriptors = std::move(desc);
  fm.occupant_names = ds.occupant_ids();

  std::vector<double> out_rows;
  const auto spans = ds.occupant_spans();

  // Forward-fill bookkeeping for the five optional sensor columns.
  constexpr int kFillables = 5;
  constexpr std::int64_t kMaxFillGapMin = 15;

  for (std::size_t oi = 0; oi < spans.size(); ++oi) {
    auto [b, e] = spans[oi];
    std::array<double, kFillables> last_val{};
    std::array<Minute, kFillables> last_at;
    last_at.fill(std::numeric_limits<Minute>::min() / 2);
    std::array<int, kNumResources> prev_status{};  // last observed status, 0 before any
    std::array<int, kNumResources> switches{};
    std::array<int, kNumResources> last_in_day{};  // last status seen inside the current day
    std::array<bool, kNumResources> day_has_prev{};
    double last_rank = 0.0;
    std::int64_t cur_day = std::numeric_limits<std::int64_t>::min();

    for (std::size_t i = b; i < e; ++i) {
      const OccupantRecord& r = ds.records[i];
      std::int64_t day = day_of_minute(r.minute);
      if (day != cur_day) {
        cur_day = day;
        switches.fill(0);
        day_has_prev.fill(false);
      }

      const std::optional<double>* fields[kFillables] = {
          &r.ext_temp_c, &r.ext_humidity_pct, &r.ext_solar_wm2, &r.room_temp_c,
          &r.room_humidity_pct};
      std::array<double, kFillables> filled{};
      bool valid = true;
      for (int k = 0; k < kFillables; ++k) {
        if (*fields[k]) {
          last_val[k] = **fields[k];
          last_at[k] = r.minute;
          filled[k] = last_val[k];
        } else if (r.minute - last_at[k] <= kMaxFillGapMin) {
          filled[k] = last_val[k];
        } else {
          valid = false;  // gap too long; row dropped
        }
      }
      if (r.rank) last_rank = *r.rank;

      if (valid) {
        std::vector<double> row(d, 0.0);
        row[0] = filled[0];
        row[1] = filled[1];
        row[2] = filled[2];
        row[3] = filled[3];
        row[4] = filled[4];
        row[5] = r.points_game;
        row[6] = r.points_survey;
        row[7] = last_rank;
        row[8] = r.portal_visits;
        int mod = minute_of_day(r.minute);
        for (int k = 0; k < kNumResources; ++k) {
          std::size_t base = 9 + 4 * static_cast<std::size_t>(k);
          row[base + 0] = prev_status[k];
          row[base + 1] = r.usage_today[k];
          row[base + 2] = switches[k];
          row[base + 3] = mod > 0 ? 100.0 * r.usage_today[k] / mod : 0.0;
        }
        bool morning = mod >= 360 && mod < 1080;
        bool weekend = is_weekend(r.minute);
        row[9 + 16 + 0] = morning ? 1.0 : 0.0;
        row[9 + 16 + 1] = morning ? 0.0 : 1.0;
        row[9 + 16 + 2] = weekend ? 0.0 : 1.0;
        row[9 + 16 + 3] = weekend ? 1.0 : 0.0;
        for (std::size_t c = 0; c < cal_names.size(); ++c) {
          row[9 + 16 + 4 + c] = calendar.contains(cal_names[c], day) ? 1.0 : 0.0;
        }
        out_rows.insert(out_rows.end(), row.begin(), row.end());
        for (int k = 0; k < kNumResources; ++k) fm.labels[k].push_back(r.status[k]);
        fm.row_minutes.push_back(r.minute);
        fm.row_occupants.push_back(static_cast<int>(oi));
      }

      // Advance day-so-far state with this record's status (it becomes part of
      // the next row's lagged prefix).
      for (int k = 0; k < kNumResources; ++k) {
        if (day_has_prev[k] && r.status[k] != last_in_day[k]) ++switches[k];
        last_in_day[k] = r.status[k];
        day_has_prev[k] = true;
        prev_status[k] = r.status[k];
      }
    }
  }

  fm.rows.rows = fm.row_minutes.size();
  fm.rows.cols = d;
  fm.rows.a = std::move(out_rows);
  return fm;
}

FeatureMatrix select_columns(const FeatureMatrix& fm, const std::vector<std::string>& names) {
  std::vector<int> idx;
  for (const auto& n : names) {
    int c = fm.column_index(n);
    if (c < 0) fail(Errc::BadValue, "unknown feature '" + n + "'");
    idx.push_back(c);
  }
  FeatureMatrix out;
  out.labels = fm.labels;
  out.row_minutes = fm.row_minutes;
  out.row_occupants = fm.row_occupants;
  out.occupant_names = fm.occupant_names;
  for (int c : idx) out.descriptors.push_back(fm.descriptors[c]);
  out.rows = Mat(fm.n_rows(), idx.size());
  for (std::size_t r = 0; r < fm.n_rows(); ++r) {
    for (std::size_t j = 0; j < idx.size(); ++j) out.rows(r, j) = fm.rows(r, idx[j]);
  }
  return out;
}

FeatureMatrix select_rows(const FeatureMatrix& fm, const std::vector<std::size_t>& idx) {
  FeatureMatrix out;
  out.descriptors = fm.descriptors;
  out.occupant_names = fm.occupant_names;
  out.rows = Mat(idx.size(), fm.n_cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::size_t r = idx[i];
    for (std::size_t c = 0; c < fm.n_cols(); ++c) out.rows(i, c) = fm.rows(r, c);
    for (int k = 0; k < kNumResources; ++k) out.labels[k].push_back(fm.labels[k][r]);
    out.row_minutes.push_back(fm.row_minutes[r]);
    out.row_occupants.push_back(fm.row_occupants[r]);
  }
  return out;
}

const char* scenario_name(Scenario s) {
  return s == Scenario::StepAhead ? "step-ahead" : "sensor-free";
}

FeatureMatrix scenario_filter(const FeatureMatrix& fm, Scenario s) {
  if (s == Scenario::StepAhead) return fm;
  std::vector<std::string> keep;
  for (const auto& d : fm.descriptors) {
    if (!d.sensor_derived) keep.push_back(d.name);
  }
  if (keep.empty()) fail(Errc::NoFeaturesLeft, "sensor-free filter removed every feature");
  return select_columns(fm, keep);
}

WindowedTensor make_windows(std::shared_ptr<const FeatureMatrix> fm, ResourceKind resource,
                            int window_len, int stride) {
  if (!fm) fail(Errc::EmptyDataset, "make_windows: null matrix");
  if (window_len < 1) fail(Errc::InvalidConfig, "window_len must be >= 1");
  if (stride < 1) fail(Errc::InvalidConfig, "stride must be >= 1");
  WindowedTensor wt;
  wt.window_len = window_len;
  wt.stride = stride;
  wt.source = fm;
  const auto& labels = fm->labels[static_cast<int>(resource)];
  const std::size_t n = fm->n_rows();
  std::size_t run_start = 0;
  auto flush_run = [&](std::size_t run_end) {  // [run_start, run_end)
    std::size_t len = run_end - run_start;
    for (std::size_t s = run_start;
         len >= static_cast<std::size_t>(window_len) &&
         s + window_len <= run_end;
         s += stride) {
      wt.window_start.push_back(s);
      wt.window_label.push_back(labels[s + window_len - 1]);
    }
  };
  for (std::size_t i = 1; i <= n; ++i) {
    bool brk = i == n || fm->row_occupants[i] != fm->row_occupants[i - 1] ||
               fm->row_minutes[i] - fm->row_minutes[i - 1] != 1;
    if (brk) {
      flush_run(i);
      run_start = i;
    }
  }
  if (wt.window_start.empty()) {
    fail(Errc::WindowTooLong, "window of " + std::to_string(window_len) +
                                  " rows exceeds every contiguous occupant run");
  }
  return wt;
}

}  // namespace seqchoice
