// prep.hpp — standardization, mutual-information estimation, mRMR greedy
// feature selection, and SMOTE minority oversampling.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seqchoice/data.hpp"
#include "seqchoice/linalg.hpp"

namespace seqchoice {

struct StandardizationStats {
  // Population convention (divide by n). sd == 0 marks a constant column
  // that passes through unscaled.
  std::vector<double> mean;
  std::vector<double> sd;
};

// Training rows when `stats` is empty; otherwise applies the stored stats.
std::pair<FeatureMatrix, StandardizationStats> standardize(
    const FeatureMatrix& fm, const std::optional<StandardizationStats>& stats = std::nullopt);

// Raw-matrix variant used deeper in the pipeline.
Mat apply_standardization(const Mat& X, const StandardizationStats& stats);
StandardizationStats fit_standardization(const Mat& X);

struct DiscretizedMatrix {
  std::vector<std::vector<int>> columns;  // bin ids per column, each in [0, bins[c])
  std::vector<int> bins;
  std::vector<std::vector<double>> edges;  // strictly increasing interior edges
};

// Equal-frequency binning; continuous columns get up to `bins` bins, columns
// with <= 2 distinct values keep one bin per value.
DiscretizedMatrix discretize(const Mat& X, int bins = 10);

// Plug-in estimate in nats from joint counts.
double mutual_information(const std::vector<int>& x, const std::vector<int>& y);

struct SelectionResult {
  std::vector<std::string> names;   // selection order
  std::vector<int> indices;         // column indices, same order
  std::vector<double> scores;       // greedy criterion value at each pick
};

// Greedy MID criterion: argmax over unselected f of
//   I(f; y) - (1/|S|) * sum_{s in S} I(f; s),
// first pick by relevance alone; ties break toward the lower column index.
SelectionResult mrmr_select(const DiscretizedMatrix& dm, const std::vector<int>& y, int k,
                            const std::vector<std::string>& names = {});

std::string selection_to_csv(const SelectionResult& sel);

struct BalanceConfig {
  int k_neighbors = 5;
  double target_ratio = 1.0;  // minority/majority after balancing, in (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

// Synthetic rows p + s*(q - p) for minority p, one of its k nearest minority
// neighbors q, s ~ U[0,1]. Requires minority count > k_neighbors.
Mat smote(const Mat& minority_rows, int k_neighbors, int n_synthetic, std::uint64_t seed);

// Appends synthetic minority rows until target_ratio; originals unchanged and
// ordered first.
std::pair<Mat, std::vector<int>> balance_dataset(const Mat& X, const std::vector<int>& y,
                                                 const BalanceConfig& cfg);

}  // namespace seqchoice
