#include "seqchoice/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqchoice/parallel.hpp"
#include "seqchoice/rng.hpp"

namespace seqchoice {

double sigmoid(double z) {
  if (z >= 0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_two_classes(const std::vector<int>& y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    has0 = has0 || v == 0;
    has1 = has1 || v == 1;
  }
  if (!has0 || !has1) fail(Errc::SingleClass, "training labels contain a single class");
}

}  // namespace

double predict_proba(const LinearModel& m, std::span<const double> x) {
  if (x.size() != m.weights.size()) {
    fail(Errc::DimensionMismatch, "feature vector of " + std::to_string(x.size()) +
                                      " vs model of " + std::to_string(m.weights.size()));
  }
  return sigmoid(dot(m.weights, x) + m.bias);
}

double logistic_loss(const Mat& X, const std::vector<int>& y, std::span<const double> w,
                     double bias, Penalty penalty, double lambda) {
  double loss = 0.0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    double z = dot(X.row(r), w) + bias;
    loss += softplus(z) - (y[r] ? z : 0.0);
  }
  loss /= static_cast<double>(X.rows);
  if (penalty == Penalty::L2) {
    for (double v : w) loss += lambda * v * v;
  } else if (penalty == Penalty::L1) {
    for (double v : w) loss += lambda * std::abs(v);
  }
  return loss;
}

void logistic_grad(const Mat& X, const std::vector<int>& y, std::span<const double> w,
                   double bias, Penalty penalty, double lambda, std::span<double> gw,
                   double& gb) {
  std::fill(gw.begin(), gw.end(), 0.0);
  gb = 0.0;
  for (std::size_t r = 0; r < X.rows; ++r) {
    auto xr = X.row(r);
    double e = sigmoid(dot(xr, w) + bias) - y[r];
    for (std::size_t c = 0; c < gw.size(); ++c) gw[c] += e * xr[c];
    gb += e;
  }
  double inv = 1.0 / static_cast<double>(X.rows);
  for (auto& g : gw) g *= inv;
  gb *= inv;
  if (penalty == Penalty::L2) {
    for (std::size_t c = 0; c < gw.size(); ++c) gw[c] += 2.0 * lambda * w[c];
  }
  // L1 is non-smooth; the trainer applies it proximally.
}

LinearModel train_logistic(const Mat& X, const std::vector<int>& y, Penalty penalty,
                           double lambda, const OptBudget& budget, OptReport* report) {
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "train_logistic");
  check_two_classes(y);
  const std::size_t d = X.cols;
  Vec w(d, 0.0);
  double bias = 0.0;
  Vec gw(d, 0.0);
  double gb = 0.0;
  const Penalty smooth_pen = penalty == Penalty::L1 ? Penalty::None : penalty;

  auto smooth_loss = [&](const Vec& wv, double bv) {
    return logistic_loss(X, y, wv, bv, smooth_pen, lambda);
  };

  double step = 1.0;
  OptReport rep;
  for (int it = 0; it < budget.max_iter; ++it) {
    logistic_grad(X, y, w, bias, smooth_pen, lambda, gw, gb);
    double f0 = smooth_loss(w, bias);

    // Backtracking proximal gradient step (plain gradient step when no L1).
    Vec wn(d);
    double bn = 0.0;
    double t = std::min(step * 2.0, 1e4);
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t c = 0; c < d; ++c) {
        double v = w[c] - t * gw[c];
        if (penalty == Penalty::L1) {
          double thr = lambda * t;
          v = v > thr ? v - thr : (v < -thr ? v + thr : 0.0);
        }
        wn[c] = v;
      }
      bn = bias - t * gb;
      // Sufficient decrease on the smooth part.
      double quad = 0.0, lin = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double dv = wn[c] - w[c];
        lin += gw[c] * dv;
        quad += dv * dv;
      }
      double db = bn - bias;
      lin += gb * db;
      quad += db * db;
      if (smooth_loss(wn, bn) <= f0 + lin + quad / (2.0 * t) + 1e-15) break;
      t *= 0.5;
    }
    step = t;

    // Convergence on the prox-gradient mapping norm.
    double gnorm = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double dv = (w[c] - wn[c]) / t;
      gnorm += dv * dv;
    }
    double db = (bias - bn) / t;
    gnorm = std::sqrt(gnorm + db * db);

    w.swap(wn);
    bias = bn;
    rep.iterations = it + 1;
    rep.grad_norm = gnorm;
    if (gnorm <= budget.grad_tol) {
      rep.converged = true;
      break;
    }
  }
  if (report) *report = rep;
  LinearModel m;
  m.weights = std::move(w);
  m.bias = bias;
  m.link = Link::Logit;
  m.penalty = penalty;
  m.lambda = lambda;
  return m;
}

LinearModel train_lda(const Mat& X, const std::vector<int>& y) {
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "train_lda");
  check_two_classes(y);
  const std::size_t n = X.rows, d = X.cols;
  std::size_t n1 = 0;
  for (int v : y) n1 += v;
  std::size_t n0 = n - n1;
  if (n <= 2) fail(Errc::DegenerateCovariance, "need more than 2 rows");

  Vec mu0(d, 0.0), mu1(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto& mu = y[r] ? mu1 : mu0;
    for (std::size_t c = 0; c < d; ++c) mu[c] += X(r, c);
  }
  for (std::size_t c = 0; c < d; ++c) {
    mu0[c] /= static_cast<double>(n0);
    mu1[c] /= static_cast<double>(n1);
  }

  // Pooled within-class covariance with a small ridge.
  Mat cov(d, d);
  for (std::size_t r = 0; r < n; ++r) {
    const Vec& mu = y[r] ? mu1 : mu0;
    for (std::size_t i = 0; i < d; ++i) {
      double di = X(r, i) - mu[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += di * (X(r, j) - mu[j]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double v = cov(i, j) / static_cast<double>(n - 2);
      cov(i, j) = v;
      cov(j, i) = v;
    }
    cov(i, i) += 1e-6;
  }

  Vec diff(d);
  for (std::size_t c = 0; c < d; ++c) diff[c] = mu1[c] - mu0[c];
  Vec w;
  if (!solve_spd(cov, diff, w)) {
    fail(Errc::DegenerateCovariance, "pooled covariance not positive definite after ridge");
  }
  double b = std::log(static_cast<double>(n1) / static_cast<double>(n0));
  for (std::size_t c = 0; c < d; ++c) b -= 0.5 * (mu1[c] + mu0[c]) * w[c];

  LinearModel m;
  m.weights = std::move(w);
  m.bias = b;
  m.link = Link::LdaGaussian;
  return m;
}

LinearModel train_linear_svm(const Mat& X, const std::vector<int>& y, double C, Penalty penalty,
                             double lambda, const OptBudget& budget) {
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "train_linear_svm");
  check_two_classes(y);
  const std::size_t n = X.rows, d = X.cols;
  Vec w(d, 0.0), g(d, 0.0);
  double bias = 0.0, gb = 0.0;
  const double eff = std::max(lambda, 1e-2);
  const int iters = std::min(budget.max_iter, 5000);
  for (int t = 0; t < iters; ++t) {
    std::fill(g.begin(), g.end(), 0.0);
    gb = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double yy = y[r] ? 1.0 : -1.0;
      if (yy * (dot(X.row(r), w) + bias) < 1.0) {
        auto xr = X.row(r);
        for (std::size_t c = 0; c < d; ++c) g[c] -= yy * xr[c];
        gb -= yy;
      }
    }
    double invn = C / static_cast<double>(n);
    for (auto& v : g) v *= invn;
    gb *= invn;
    if (penalty == Penalty::L2) {
      for (std::size_t c = 0; c < d; ++c) g[c] += lambda * w[c];
    } else if (penalty == Penalty::L1) {
      for (std::size_t c = 0; c < d; ++c) g[c] += lambda * (w[c] > 0 ? 1.0 : (w[c] < 0 ? -1.0 : 0.0));
    }
    double eta = 1.0 / (eff * (t + 10.0));
    for (std::size_t c = 0; c < d; ++c) w[c] -= eta * g[c];
    bias -= eta * gb;
  }
  LinearModel m;
  m.weights = std::move(w);
  m.bias = bias;
  m.link = Link::SvmMargin;
  m.penalty = penalty;
  m.lambda = lambda;
  return m;
}

double DecisionTree::predict(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].p1;
}

namespace {

double gini(std::size_t n1, std::size_t n) {
  if (n == 0) return 0.0;
  double p = static_cast<double>(n1) / static_cast<double>(n);
  return 2.0 * p * (1.0 - p);
}

struct TreeBuilder {
  const Mat& X;
  const std::vector<int>& y;
  const ForestConfig& cfg;
  Rng& rng;
  DecisionTree tree;

  int build(std::vector<std::size_t>& rows, int depth) {
    std::size_t n = rows.size();
    std::size_t n1 = 0;
    for (std::size_t r : rows) n1 += y[r];

    auto make_leaf = [&]() {
      DecisionTree::Node leaf;
      leaf.p1 = n ? static_cast<double>(n1) / static_cast<double>(n) : 0.0;
      leaf.count = static_cast<int>(n);
      tree.nodes.push_back(leaf);
      return static_cast<int>(tree.nodes.size()) - 1;
    };

    if (depth >= cfg.max_depth || n1 == 0 || n1 == n ||
        n < 2 * static_cast<std::size_t>(cfg.min_leaf)) {
      return make_leaf();
    }

    // Random feature subset per split.
    const int d = static_cast<int>(X.cols);
    int m = cfg.feat_subset > 0 ? std::min(cfg.feat_subset, d)
                                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    std::vector<int> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < m; ++i) {
      std::size_t j = i + rng.index(static_cast<std::uint64_t>(d - i));
      std::swap(feats[i], feats[j]);
    }

    const double parent = gini(n1, n);
    int best_f = -1;
    double best_thr = 0.0, best_gain = 1e-12;
    std::vector<std::pair<double, int>> vals(n);
    for (int fi = 0; fi < m; ++fi) {
      int f = feats[fi];
      for (std::size_t i = 0; i < n; ++i) vals[i] = {X(rows[i], f), y[rows[i]]};
      std::sort(vals.begin(), vals.end());
      std::size_t left1 = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left1 += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;
        std::size_t nl = i + 1, nr = n - nl;
        if (nl < static_cast<std::size_t>(cfg.min_leaf) ||
            nr < static_cast<std::size_t>(cfg.min_leaf)) {
          continue;
        }
        double gain = parent - (static_cast<double>(nl) / n) * gini(left1, nl) -
                      (static_cast<double>(nr) / n) * gini(n1 - left1, nr);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_f < 0) return make_leaf();

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (X(r, best_f) <= best_thr ? left : right).push_back(r);
    }
    DecisionTree::Node node;
    node.feature = best_f;
    node.threshold = best_thr;
    node.count = static_cast<int>(n);
    tree.nodes.push_back(node);
    int self = static_cast<int>(tree.nodes.size()) - 1;
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[self].left = build(left, depth + 1);
    tree.nodes[self].right = build(right, depth + 1);
    return self;
  }
};

}  // namespace

double EnsembleModel::predict_proba(std::span<const double> x) const {
  std::size_t votes = 0;
  for (const auto& m : linear_members) votes += seqchoice::predict_proba(m, x) > 0.5;
  for (const auto& t : tree_members) votes += t.predict(x) > 0.5;
  return static_cast<double>(votes) / static_cast<double>(size());
}

EnsembleModel train_bagged_logistic(const Mat& X, const std::vector<int>& y, int n_members,
                                    std::uint64_t seed) {
  if (n_members < 1) fail(Errc::InvalidConfig, "n_members must be >= 1");
  check_two_classes(y);
  EnsembleModel ens;
  ens.linear_members.resize(n_members);
  std::vector<std::string> errors(n_members);
  par::parallel_for(n_members, [&](std::int64_t i) {
    Rng rng(derive_seed(seed, "bag.member", static_cast<std::uint64_t>(i)));
    const std::size_t n = X.rows;
    Mat Xb(n, X.cols);
    std::vector<int> yb(n);
    // Bootstrap replicates are redrawn until both classes appear.
    for (int attempt = 0;; ++attempt) {
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t pick = rng.index(n);
        for (std::size_t c = 0; c < X.cols; ++c) Xb(r, c) = X(pick, c);
        yb[r] = y[pick];
      }
      bool h0 = false, h1 = false;
      for (int v : yb) {
        h0 = h0 || v == 0;
        h1 = h1 || v == 1;
      }
      if ((h0 && h1) || attempt > 64) break;
    }
    OptBudget fast;
    fast.max_iter = 2000;
    fast.grad_tol = 1e-6;
    try {
      ens.linear_members[i] = train_logistic(Xb, yb, Penalty::L2, 1e-6, fast);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) fail(Errc::SingleClass, e);
  }
  return ens;
}

EnsembleModel train_random_forest(const Mat& X, const std::vector<int>& y,
                                  const ForestConfig& cfg) {
  if (cfg.n_trees < 1) fail(Errc::InvalidConfig, "n_trees must be >= 1");
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "train_random_forest");
  if (X.rows == 0) fail(Errc::EmptyDataset, "train_random_forest");
  EnsembleModel ens;
  ens.tree_members.resize(cfg.n_trees);
  par::parallel_for(cfg.n_trees, [&](std::int64_t i) {
    Rng rng(derive_seed(cfg.seed, "forest.tree", static_cast<std::uint64_t>(i)));
    std::vector<std::size_t> rows(X.rows);
    if (cfg.bootstrap) {
      for (auto& r : rows) r = rng.index(X.rows);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    TreeBuilder b{X, y, cfg, rng, {}};
    b.build(rows, 0);
    ens.tree_members[i] = std::move(b.tree);
  });
  return ens;
}

NeighborIndex build_neighbor_index(const Mat& X, const std::vector<int>& y, int k) {
  if (X.rows != y.size()) fail(Errc::LengthMismatch, "build_neighbor_index");
  if (X.rows == 0) fail(Errc::EmptyDataset, "build_neighbor_index");
  return NeighborIndex{X, y, k};
}

double knn_predict(const NeighborIndex& idx, std::span<const double> x, int k) {
  const std::size_t n = idx.points.rows;
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    fail(Errc::KTooLarge, "k=" + std::to_string(k) + " with " + std::to_string(n) + " cached rows");
  }
  if (x.size() != idx.points.cols) fail(Errc::DimensionMismatch, "knn_predict");
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < n; ++r) dist[r] = {sq_dist(idx.points.row(r), x), r};
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  int ones = 0;
  for (int i = 0; i < k; ++i) ones += idx.labels[dist[i].second];
  return static_cast<double>(ones) / static_cast<double>(k);
}

}  // namespace seqchoice
