#include "seqchoice/points.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seqchoice/rng.hpp"

namespace seqchoice {

void PointsConfig::validate() const {
  for (double s : booster) {
    if (!(s > 0)) fail(Errc::InvalidConfig, "booster must be > 0");
  }
  if (award_period_days < 1) fail(Errc::InvalidConfig, "award_period_days must be >= 1");
}

std::map<std::string, Baseline> compute_baselines(const Dataset& pre_game) {
  if (pre_game.empty()) fail(Errc::InsufficientHistory, "empty pre-game dataset");
  std::map<std::string, Baseline> out;
  for (auto [b, e] : pre_game.occupant_spans()) {
    const std::string& id = pre_game.records[b].occupant_id;
    // Daily on-minute totals keyed by day.
    std::map<std::int64_t, std::array<double, kNumResources>> daily;
    for (std::size_t i = b; i < e; ++i) {
      const auto& r = pre_game.records[i];
      auto& acc = daily[day_of_minute(r.minute)];
      for (int k = 0; k < kNumResources; ++k) acc[k] += r.status[k];
    }
    int n_days = static_cast<int>(daily.size());
    int n_weekend = 0;
    for (const auto& [day, acc] : daily) {
      (void)acc;
      if (weekday_of_day(day) >= 5) ++n_weekend;
    }
    if (n_days < 7 || n_weekend < 1) {
      fail(Errc::InsufficientHistory,
           "occupant '" + id + "': " + std::to_string(n_days) + " days, " +
               std::to_string(n_weekend) + " weekend days (need >= 7 incl. a weekend)");
    }
    Baseline base;
    std::array<double, kNumResources> wd_sum{}, we_sum{};
    int wd_n = n_days - n_weekend, we_n = n_weekend;
    for (const auto& [day, acc] : daily) {
      if (weekday_of_day(day) >= 5) {
        for (int k = 0; k < kNumResources; ++k) we_sum[k] += acc[k];
      } else {
        for (int k = 0; k < kNumResources; ++k) wd_sum[k] += acc[k];
      }
    }
    for (int k = 0; k < kNumResources; ++k) {
      base.weekday_min[k] = wd_n > 0 ? wd_sum[k] / wd_n : 0.0;
      base.weekend_min[k] = we_sum[k] / we_n;
      // Never-used resources are clamped so the points formula stays defined.
      if (base.weekday_min[k] <= 0) base.weekday_min[k] = 1.0;
      if (base.weekend_min[k] <= 0) base.weekend_min[k] = 1.0;
    }
    out[id] = base;
  }
  return out;
}

double daily_points(double baseline_min, double usage_min, double booster) {
  if (!(baseline_min > 0)) fail(Errc::NonPositiveBaseline, format_double(baseline_min));
  if (!(usage_min >= 0)) fail(Errc::BadValue, "usage must be >= 0");
  if (!(booster > 0)) fail(Errc::BadValue, "booster must be > 0");
  return booster * (baseline_min - usage_min) / baseline_min;
}

PointsLedger update_rankings(PointsLedger ledger) {
  std::sort(ledger.entries.begin(), ledger.entries.end(), [](const auto& a, const auto& b) {
    if (a.points != b.points) return a.points > b.points;
    return a.occupant_id < b.occupant_id;
  });
  for (std::size_t i = 0; i < ledger.entries.size(); ++i) {
    ledger.entries[i].rank = static_cast<int>(i) + 1;
  }
  return ledger;
}

std::vector<std::string> run_lottery(const PointsLedger& ledger, int winners, std::uint64_t seed) {
  struct Cand {
    std::string id;
    double w;
  };
  std::vector<Cand> cands;
  for (const auto& e : ledger.entries) {
    double w = std::max(e.points, 0.0);
    if (w > 0) cands.push_back({e.occupant_id, w});
  }
  // Deterministic candidate order regardless of ledger order.
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.id < b.id; });
  if (winners < 0 || static_cast<std::size_t>(winners) > cands.size()) {
    fail(Errc::NotEnoughParticipants, std::to_string(cands.size()) +
                                          " participants with positive points, want " +
                                          std::to_string(winners) + " winners");
  }
  Rng rng(derive_seed(seed, "lottery"));
  std::vector<std::string> out;
  for (int w = 0; w < winners; ++w) {
    double total = 0.0;
    for (const auto& c : cands) total += c.w;
    double u = rng.uniform() * total;
    std::size_t pick = cands.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      acc += cands[i].w;
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(cands[pick].id);
    cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::string ledger_to_csv(const PointsLedger& ledger) {
  std::string out = "occupant_id,points,rank\n";
  for (const auto& e : ledger.entries) {
    out += e.occupant_id + ',' + format_double(e.points) + ',' + std::to_string(e.rank) + '\n';
  }
  return out;
}

}  // namespace seqchoice
