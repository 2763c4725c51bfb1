// points.hpp — pre-game baselines, daily points, rankings, and the
// proportional gift-card lottery.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seqchoice/data.hpp"

namespace seqchoice {

struct Baseline {
  // Strictly positive: a resource never used pre-game is clamped to one
  // minute so the points formula stays defined.
  std::array<double, kNumResources> weekday_min{};
  std::array<double, kNumResources> weekend_min{};

  double for_minute(ResourceKind r, Minute m) const {
    return is_weekend(m) ? weekend_min[static_cast<int>(r)] : weekday_min[static_cast<int>(r)];
  }
};

struct PointsConfig {
  std::array<double, kNumResources> booster{100.0, 100.0, 100.0, 100.0};
  int award_period_days = 14;  // bi-weekly lottery

  void validate() const;
};

struct PointsLedger {
  struct Entry {
    std::string occupant_id;
    double points = 0.0;
    int rank = 0;
  };
  std::vector<Entry> entries;
};

// Mean daily on-minutes per resource over weekdays and weekends separately.
// Requires >= 7 distinct days per occupant including at least one weekend day.
std::map<std::string, Baseline> compute_baselines(const Dataset& pre_game);

// Eq.-style daily score: booster * (baseline - usage) / baseline.
double daily_points(double baseline_min, double usage_min, double booster);

// Ranks by descending points, ties broken by occupant_id ascending.
PointsLedger update_rankings(PointsLedger ledger);

// Sampling without replacement with probability proportional to max(points, 0).
std::vector<std::string> run_lottery(const PointsLedger& ledger, int winners, std::uint64_t seed);

std::string ledger_to_csv(const PointsLedger& ledger);

}  // namespace seqchoice
