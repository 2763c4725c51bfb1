#include "seqchoice/prep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqchoice/parallel.hpp"
#include "seqchoice/rng.hpp"

namespace seqchoice {

StandardizationStats fit_standardization(const Mat& X) {
  if (X.rows < 2) fail(Errc::TooFewRows, "standardize needs >= 2 rows to fit");
  StandardizationStats st;
  st.mean.assign(X.cols, 0.0);
  st.sd.assign(X.cols, 0.0);
  for (std::size_t c = 0; c < X.cols; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) m += X(r, c);
    m /= static_cast<double>(X.rows);
    double v = 0.0;
    for (std::size_t r = 0; r < X.rows; ++r) {
      double d = X(r, c) - m;
      v += d * d;
    }
    v /= static_cast<double>(X.rows);  // population convention
    st.mean[c] = m;
    st.sd[c] = v > 0 ? std::sqrt(v) : 0.0;
  }
  return st;
}

Mat apply_standardization(const Mat& X, const StandardizationStats& stats) {
  if (stats.mean.size() != X.cols) fail(Errc::LengthMismatch, "stats/matrix column mismatch");
  Mat out = X;
  for (std::size_t c = 0; c < X.cols; ++c) {
    double sd = stats.sd[c];
    if (sd == 0.0) continue;  // constant column passes through
    if (sd < 1e-12) sd = 1e-12;
    for (std::size_t r = 0; r < X.rows; ++r) {
      out(r, c) = (X(r, c) - stats.mean[c]) / sd;
    }
  }
  return out;
}

std::pair<FeatureMatrix, StandardizationStats> standardize(
    const FeatureMatrix& fm, const std::optional<StandardizationStats>& stats) {
  StandardizationStats st = stats ? *stats : fit_standardization(fm.rows);
  FeatureMatrix out = fm;
  out.rows = apply_standardization(fm.rows, st);
  return {std::move(out), std::move(st)};
}

DiscretizedMatrix discretize(const Mat& X, int bins) {
  if (bins < 2) fail(Errc::InvalidConfig, "bins must be >= 2");
  DiscretizedMatrix dm;
  dm.columns.resize(X.cols);
  dm.bins.resize(X.cols);
  dm.edges.resize(X.cols);
  for (std::size_t c = 0; c < X.cols; ++c) {
    std::vector<double> sorted(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) sorted[r] = X(r, c);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> distinct;
    for (double v : sorted) {
      if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
    }

    std::vector<double> edges;
    if (distinct.size() <= 2) {
      // Dummy / constant column: one bin per distinct value.
      for (std::size_t i = 1; i < distinct.size(); ++i) {
        edges.push_back(0.5 * (distinct[i - 1] + distinct[i]));
      }
    } else {
      // Equal-frequency interior edges at the k/bins quantiles; duplicate
      // cut values collapse so edges stay strictly increasing.
      for (int k = 1; k < bins; ++k) {
        std::size_t pos = static_cast<std::size_t>(k) * sorted.size() / static_cast<std::size_t>(bins);
        double e = sorted[pos];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
      }
    }
    dm.bins[c] = static_cast<int>(edges.size()) + 1;
    auto& col = dm.columns[c];
    col.resize(X.rows);
    for (std::size_t r = 0; r < X.rows; ++r) {
      double v = X(r, c);
      // values equal to an edge land in the bin above it; only consistency matters
      col[r] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
    }
    dm.edges[c] = std::move(edges);
  }
  return dm;
}

double mutual_information(const std::vector<int>& x, const std::vector<int>& y) {
  if (x.size() != y.size()) fail(Errc::LengthMismatch, "mutual_information");
  if (x.empty()) fail(Errc::LengthMismatch, "mutual_information: empty input");
  int bx = 1 + *std::max_element(x.begin(), x.end());
  int by = 1 + *std::max_element(y.begin(), y.end());
  std::vector<std::int64_t> joint(static_cast<std::size_t>(bx) * by, 0);
  std::vector<std::int64_t> mx(bx, 0), my(by, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    joint[static_cast<std::size_t>(x[i]) * by + y[i]]++;
    mx[x[i]]++;
    my[y[i]]++;
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < bx; ++a) {
    for (int b = 0; b < by; ++b) {
      std::int64_t c = joint[static_cast<std::size_t>(a) * by + b];
      if (c == 0) continue;
      mi += (c / n) * std::log(c * n / (static_cast<double>(mx[a]) * static_cast<double>(my[b])));
    }
  }
  return mi < 0 ? 0.0 : mi;  // plug-in MI is nonnegative; guard rounding
}

SelectionResult mrmr_select(const DiscretizedMatrix& dm, const std::vector<int>& y, int k,
                            const std::vector<std::string>& names) {
  const int d = static_cast<int>(dm.columns.size());
  if (k < 1) fail(Errc::InvalidConfig, "k must be >= 1");
  if (k > d) fail(Errc::KTooLarge, "k=" + std::to_string(k) + " > " + std::to_string(d) + " features");
  for (const auto& col : dm.columns) {
    if (col.size() != y.size()) fail(Errc::LengthMismatch, "mrmr_select");
  }

  // Relevance per feature; independent columns, computed in parallel slots.
  std::vector<double> relevance(d);
  par::parallel_for(d, [&](std::int64_t f) {
    relevance[f] = mutual_information(dm.columns[f], y);
  });

  // Pairwise MI cache, filled lazily one candidate row at a time.
  std::vector<double> pair_mi(static_cast<std::size_t>(d) * d,
                              std::numeric_limits<double>::quiet_NaN());
  auto mi_pair = [&](int a, int b) {
    double& slot = pair_mi[static_cast<std::size_t>(a) * d + b];
    if (std::isnan(slot)) {
      slot = mutual_information(dm.columns[a], dm.columns[b]);
      pair_mi[static_cast<std::size_t>(b) * d + a] = slot;
    }
    return slot;
  };

  SelectionResult sel;
  std::vector<bool> used(d, false);
  for (int step = 0; step < k; ++step) {
    int best = -1;
    double best_score = 0.0;
    for (int f = 0; f < d; ++f) {
      if (used[f]) continue;
      double score = relevance[f];
      if (!sel.indices.empty()) {
        double red = 0.0;
        for (int s : sel.indices) red += mi_pair(f, s);
        score -= red / static_cast<double>(sel.indices.size());
      }
      if (best < 0 || score > best_score) {
        best = f;
        best_score = score;
      }
    }
    used[best] = true;
    sel.indices.push_back(best);
    sel.scores.push_back(best_score);
    sel.names.push_back(static_cast<std::size_t>(best) < names.size()
                            ? names[best]
                            : "f" + std::to_string(best));
  }
  return sel;
}

std::string selection_to_csv(const SelectionResult& sel) {
  std::string out = "rank,feature,score\n";
  for (std::size_t i = 0; i < sel.names.size(); ++i) {
    out += std::to_string(i + 1) + ',' + sel.names[i] + ',' + format_double(sel.scores[i]) + '\n';
  }
  return out;
}

void BalanceConfig::validate() const {
  if (k_neighbors < 1) fail(Errc::InvalidConfig, "k_neighbors must be >= 1");
  if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
    fail(Errc::InvalidConfig, "target_ratio must be in (0, 1]");
  }
}

Mat smote(const Mat& minority_rows, int k_neighbors, int n_synthetic, std::uint64_t seed) {
  const std::size_t m = minority_rows.rows;
  if (static_cast<int>(m) <= k_neighbors) {
    fail(Errc::TooFewMinority, std::to_string(m) + " minority rows with k=" +
                                   std::to_string(k_neighbors));
  }
  if (n_synthetic <= 0) return Mat(0, minority_rows.cols);

  // k nearest minority neighbors per point (excluding self, ties by index).
  std::vector<std::vector<std::size_t>> nn(m);
  par::parallel_for(static_cast<std::int64_t>(m), [&](std::int64_t i) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == static_cast<std::size_t>(i)) continue;
      dist.emplace_back(sq_dist(minority_rows.row(i), minority_rows.row(j)), j);
    }
    std::sort(dist.begin(), dist.end());
    nn[i].reserve(k_neighbors);
    for (int k = 0; k < k_neighbors; ++k) nn[i].push_back(dist[k].second);
  });

  Mat out(n_synthetic, minority_rows.cols);
  Rng rng(derive_seed(seed, "smote"));
  for (int s = 0; s < n_synthetic; ++s) {
    std::size_t p = static_cast<std::size_t>(s) % m;  // round-robin base point
    std::size_t q = nn[p][rng.index(static_cast<std::uint64_t>(k_neighbors))];
    double t = rng.uniform();
    for (std::size_t c = 0; c < minority_rows.cols; ++c) {
      double pv = minority_rows(p, c);
      out(s, c) = pv + t * (minority_rows(q, c) - pv);
    }
  }
  return out;
}

std::pair<Mat, std::vector<int>> balance_dataset(const Mat& X, const std::vector<int>& y,
                                                 const BalanceConfig& cfg) {
  cfg.validate();
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "balance_dataset");
  std::size_t n1 = 0;
  for (int v : y) n1 += v == 1;
  std::size_t n0 = y.size() - n1;
  if (n0 == 0 || n1 == 0) fail(Errc::SingleClass, "balance_dataset: one class absent");
  int minority_label = n1 <= n0 ? 1 : 0;
  std::size_t n_min = std::min(n0, n1), n_maj = std::max(n0, n1);

  std::int64_t want = static_cast<std::int64_t>(std::llround(cfg.target_ratio * n_maj)) -
                      static_cast<std::int64_t>(n_min);
  if (want <= 0) return {X, y};

  Mat minority(n_min, X.cols);
  std::size_t w = 0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    if (y[r] == minority_label) {
      for (std::size_t c = 0; c < X.cols; ++c) minority(w, c) = X(r, c);
      ++w;
    }
  }
  Mat synth = smote(minority, cfg.k_neighbors, static_cast<int>(want), cfg.seed);

  Mat out(X.rows + synth.rows, X.cols);
  std::copy(X.a.begin(), X.a.end(), out.a.begin());
  std::copy(synth.a.begin(), synth.a.end(), out.a.begin() + static_cast<std::ptrdiff_t>(X.a.size()));
  std::vector<int> labels = y;
  labels.insert(labels.end(), synth.rows, minority_label);
  return {std::move(out), std::move(labels)};
}

}  // namespace seqchoice
