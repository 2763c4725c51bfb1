// evaluation.hpp — ROC/AUC, k-fold plans, randomized grid search, and the
// scenario experiment runner that produces the model x resource x occupant
// AUC report.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "seqchoice/data.hpp"
#include "seqchoice/deep.hpp"
#include "seqchoice/models.hpp"
#include "seqchoice/prep.hpp"

namespace seqchoice {

// Mann-Whitney form: P(score+ > score-) + 0.5 P(tie). Throws SingleClass
// when only one label is present (reported as N/A in tables).
double roc_auc(const Vec& scores, const std::vector<int>& labels);

// The U statistic in half-units; auc = u / (n1*n0). Exposed because the
// label-flip invariance is exact in U-space.
double mann_whitney_u(const Vec& scores, const std::vector<int>& labels);

struct ROCCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
};
ROCCurve roc_curve(const Vec& scores, const std::vector<int>& labels);

struct CVPlan {
  int k = 10;
  std::vector<std::vector<std::size_t>> folds;  // disjoint, sizes differ by <= 1
  std::uint64_t seed = 0;
};

CVPlan kfold_split(std::size_t n, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Randomized grid search.

struct ParamDomain {
  std::string name;
  std::vector<double> values;  // discrete set when non-empty
  double lo = 0.0, hi = 0.0;   // otherwise uniform (or log-uniform) range
  bool log_scale = false;
};

struct GridSearchSpec {
  std::vector<ParamDomain> domains;
  int budget = 1;
  std::uint64_t seed = 0;
};

using ParamSet = std::map<std::string, double>;

struct GridSearchOutcome {
  ParamSet best;
  double best_score = 0.0;
  std::vector<std::pair<ParamSet, double>> trials;  // in sample order
};

// Samples `budget` configurations, scores each, returns the argmax; ties keep
// the first sampled.
GridSearchOutcome random_grid_search(const GridSearchSpec& spec,
                                     const std::function<double(const ParamSet&)>& score);

// ---------------------------------------------------------------------------
// Model roster.

enum class ModelKind {
  Logistic,
  Lasso,
  Ridge,
  BaggedLogistic,
  Lda,
  Knn,
  Svm,
  RandomForest,
  Mlp,
  BiLstm,
};

const char* model_kind_name(ModelKind k);
ModelKind model_kind_from_name(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::Logistic;
  ParamSet params;       // overrides for the kind's defaults
  GridSearchSpec grid;   // budget <= 1 or empty domains = no tuning
};

// A model bound to its preprocessing: selected raw feature columns, the
// training standardization, and (for the sequence model) the window length.
struct FittedPredictor {
  std::vector<std::string> feature_names;
  StandardizationStats stats;
  int window_len = 1;
  std::string model_type;
  std::variant<LinearModel, EnsembleModel, NeighborIndex, MLPModel, BiRNNModel> model;

  // `window` holds raw (unstandardized) rows of the selected features, one
  // row per minute, newest last; vector models read only the final row.
  double predict(const Mat& window) const;
};

// ---------------------------------------------------------------------------
// Scenario experiments.

struct ExperimentSplit {
  Minute train_begin = 0, train_end = 0;  // [begin, end)
  Minute test_begin = 0, test_end = 0;
};

struct RunConfig {
  int mrmr_k = 25;
  int mi_bins = 10;
  BalanceConfig balance;
  int cv_folds = 3;          // folds used while tuning
  std::uint64_t seed = 0;
  MLPConfig mlp;
  BiRNNConfig birnn;
  int birnn_stride = 1;
  double birnn_val_fraction = 0.15;  // tail of the training windows
};

struct CellResult {
  std::string occupant;
  ResourceKind resource = ResourceKind::CeilingLight;
  Scenario scenario = Scenario::StepAhead;
  std::string model;
  double auc = 0.0;        // valid only when status == "ok"
  std::string status;      // "ok" or an N/A reason
};

struct ReportTable {
  std::vector<std::string> model_names;
  std::vector<std::string> occupants;
  std::vector<ResourceKind> resources;
  Scenario scenario = Scenario::StepAhead;
  std::vector<CellResult> cells;

  const CellResult* find(const std::string& occupant, ResourceKind r,
                         const std::string& model) const;
  std::string to_csv() const;   // occupant,resource,scenario,model,auc,status
  std::string to_text() const;  // aligned table
  std::string to_html() const;  // fragment
};

struct FitOutcome {
  FittedPredictor predictor;
  double test_auc = 0.0;
  std::string status;  // "ok" or reason
  TrainReport report;
};

// Trains one roster model on one occupant's already-selected feature matrix
// and scores test AUC. SMOTE applies to the benchmark and MLP paths only.
FitOutcome fit_model_on_split(const FeatureMatrix& train_fm, const FeatureMatrix& test_fm,
                              ResourceKind resource, const ModelSpec& spec, const RunConfig& cfg,
                              std::uint64_t seed);

ReportTable run_scenario_experiment(const Dataset& ds, const CalendarConfig& calendar,
                                    const ExperimentSplit& split, Scenario scenario,
                                    const std::vector<ResourceKind>& resources,
                                    const std::vector<ModelSpec>& roster, const RunConfig& cfg);

}  // namespace seqchoice
