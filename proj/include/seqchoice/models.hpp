// models.hpp — benchmark choice-probability classifiers: logistic regression
// (plain / ridge / lasso), bagged logistic, LDA, k-NN, linear SVM and a
// CART random forest. Each fitted model exposes P(choice = on | x).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqchoice/linalg.hpp"

namespace seqchoice {

enum class Link { Logit, LdaGaussian, SvmMargin };
enum class Penalty { None, L1, L2 };

struct LinearModel {
  Vec weights;
  double bias = 0.0;
  Link link = Link::Logit;
  Penalty penalty = Penalty::None;
  double lambda = 0.0;
};

struct OptBudget {
  int max_iter = 10000;
  double grad_tol = 1e-6;
};

struct OptReport {
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

double sigmoid(double z);

// P(on | x) through the two-class softmax; all links reduce to a linear score.
double predict_proba(const LinearModel& m, std::span<const double> x);

// Mean cross-entropy of the logistic score plus the penalty term
// (lambda * ||w||_1 or lambda * ||w||_2^2; bias unpenalized). Gradients cover
// the smooth part only — L1 is handled by proximal soft-thresholding in the
// trainer, and the gradient check targets the smooth objective.
double logistic_loss(const Mat& X, const std::vector<int>& y, std::span<const double> w,
                     double bias, Penalty penalty, double lambda);
void logistic_grad(const Mat& X, const std::vector<int>& y, std::span<const double> w,
                   double bias, Penalty penalty, double lambda, std::span<double> gw,
                   double& gb);

LinearModel train_logistic(const Mat& X, const std::vector<int>& y, Penalty penalty,
                           double lambda, const OptBudget& budget = {},
                           OptReport* report = nullptr);

LinearModel train_lda(const Mat& X, const std::vector<int>& y);

LinearModel train_linear_svm(const Mat& X, const std::vector<int>& y, double C,
                             Penalty penalty = Penalty::L2, double lambda = 1e-3,
                             const OptBudget& budget = {});

struct DecisionTree {
  struct Node {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double p1 = 0.0;  // leaf: fraction of class-1 training rows
    int count = 0;
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;
  int min_leaf = 5;
  int feat_subset = 0;  // 0 = ceil(sqrt(d))
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct EnsembleModel {
  std::vector<LinearModel> linear_members;
  std::vector<DecisionTree> tree_members;

  std::size_t size() const { return linear_members.size() + tree_members.size(); }
  // Majority vote; probability is the vote fraction for class 1.
  double predict_proba(std::span<const double> x) const;
};

EnsembleModel train_bagged_logistic(const Mat& X, const std::vector<int>& y, int n_members,
                                    std::uint64_t seed);

EnsembleModel train_random_forest(const Mat& X, const std::vector<int>& y,
                                  const ForestConfig& cfg);

// Training rows are cached verbatim; prediction is a majority vote over the
// k nearest rows (Euclidean, distance ties to the lower training index).
struct NeighborIndex {
  Mat points;
  std::vector<int> labels;
  int k = 5;
};

NeighborIndex build_neighbor_index(const Mat& X, const std::vector<int>& y, int k);
double knn_predict(const NeighborIndex& idx, std::span<const double> x, int k);

}  // namespace seqchoice
