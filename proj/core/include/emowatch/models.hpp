#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emowatch/features.hpp"
#include "emowatch/random.hpp"
#include "emowatch/types.hpp"

namespace emowatch {

// The last four kinds appear in the ablation tables but are not implemented;
// fit() throws UnsupportedModelError for them.
enum class ModelKind {
  logreg,
  dtree,
  rforest,
  gnb,
  knn,
  mlp,
  svm,
  adaboost,
  gradient_boost,
  xgboost,
};

bool is_supported(ModelKind k) noexcept;
std::string_view to_string(ModelKind k) noexcept;
std::string_view display_name(ModelKind k) noexcept;
std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept;

// Per-column z-scoring fitted on training rows. Constant columns map to 0.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;

  static Normalizer fit(const FeatureMatrix& m);
  void transform(std::span<double> row) const;
  std::vector<double> transform(std::span<const double> row) const;
  FeatureMatrix transform(const FeatureMatrix& m) const;

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

struct LogRegConfig {
  double learning_rate = 0.1;
  int epochs = 1000;
  double l2 = 0.0;
  friend bool operator==(const LogRegConfig&, const LogRegConfig&) = default;
};

struct GnbConfig {
  double var_floor = 1e-9;
  friend bool operator==(const GnbConfig&, const GnbConfig&) = default;
};

struct KnnConfig {
  std::size_t k = 5;
  friend bool operator==(const KnnConfig&, const KnnConfig&) = default;
};

struct TreeConfig {
  int max_depth = 0;  // 0 = unlimited
  std::size_t min_samples_split = 2;
  friend bool operator==(const TreeConfig&, const TreeConfig&) = default;
};

struct ForestConfig {
  std::size_t trees = 100;
  bool bootstrap = true;
  bool feature_subsample = true;  // ceil(sqrt(d)) candidate features per split
  TreeConfig tree;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

struct MlpConfig {
  std::size_t hidden1 = 32;
  double dropout_rate = 0.5;
  std::size_t hidden2 = 8;
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::size_t batch_size = 0;  // 0 = full batch
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

struct ModelConfig {
  LogRegConfig logreg;
  GnbConfig gnb;
  KnnConfig knn;
  TreeConfig dtree;
  ForestConfig rforest;
  MlpConfig mlp;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double pleasant_fraction = 0.0;
  std::size_t samples = 0;
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double predict_proba(std::span<const double> x) const;
  std::size_t depth() const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct LogRegParams {
  std::vector<double> weights;
  double bias = 0.0;
  friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};

struct GnbParams {
  double prior_pleasant = 0.5;
  std::vector<double> mean_pleasant, var_pleasant;
  std::vector<double> mean_unpleasant, var_unpleasant;
  friend bool operator==(const GnbParams&, const GnbParams&) = default;
};

struct KnnParams {
  std::size_t k = 5;
  std::size_t cols = 0;
  std::vector<double> rows;  // normalized training rows, row-major
  std::vector<BinaryMood> labels;
  friend bool operator==(const KnnParams&, const KnnParams&) = default;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

// Flat parameter vector in layer order: W1 (h1 x d, row-major), b1,
// W2 (h2 x h1), b2, W3 (1 x h2), b3.
struct MlpParams {
  std::size_t inputs = 0;
  std::size_t hidden1 = 0;
  std::size_t hidden2 = 0;
  std::vector<double> weights;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct UnsupportedParams {
  friend bool operator==(const UnsupportedParams&, const UnsupportedParams&) = default;
};

using ModelParams = std::variant<UnsupportedParams, LogRegParams, GnbParams, KnnParams,
                                 DecisionTree, ForestParams, MlpParams>;

struct TrainedModel {
  ModelKind kind = ModelKind::logreg;
  ModelConfig config;
  std::uint64_t seed = 0;
  DatasetFlavor flavor = DatasetFlavor::statistical;
  std::string feature_set;                   // display name of the selector
  std::vector<std::string> feature_columns;  // raw input columns, in order
  std::optional<PcaModel> pca;
  Normalizer normalizer;  // fitted on the (post-PCA) training matrix
  ModelParams params;

  std::size_t input_width() const noexcept { return feature_columns.size(); }
};

struct FitOptions {
  unsigned jobs = 1;  // forest trees trained in parallel; output independent of jobs
};

// Fits the normalizer and then the model on the normalized matrix.
// Throws DegenerateLabelError for single-class data, DomainError for
// non-finite features and UnsupportedModelError for unsupported kinds.
TrainedModel fit(ModelKind kind, const FeatureMatrix& x, const ModelConfig& config,
                 std::uint64_t seed, FitOptions options = {});

// Per-epoch curves recorded by the MLP (test entries only when a
// validation matrix is supplied).
struct TrainingCurve {
  std::vector<double> train_loss, train_accuracy;
  std::vector<double> test_loss, test_accuracy;
};

TrainedModel fit_mlp(const FeatureMatrix& x, const ModelConfig& config, std::uint64_t seed,
                     const FeatureMatrix* validation = nullptr, TrainingCurve* curve = nullptr);

// Builds a model from a full dataset: selects the feature set, applies PCA
// when requested (fitted on `data`), then fits.
TrainedModel train_model(ModelKind kind, const FeatureMatrix& data, const FeatureSetSpec& spec,
                         const ModelConfig& config, std::uint64_t seed, FitOptions options = {},
                         DatasetFlavor flavor = DatasetFlavor::statistical);

// `x` has the model's raw input width. Throws ShapeError otherwise.
double predict_proba(const TrainedModel& m, std::span<const double> x);

// proba >= 0.5 is pleasant, except that an exact 0.5 from KNN (vote tie) or
// Gaussian NB (posterior tie) is unpleasant.
BinaryMood predict(const TrainedModel& m, std::span<const double> x);

// Picks the model's columns by name out of a row laid out as `columns`.
std::vector<double> gather_model_inputs(const TrainedModel& m, const std::vector<std::string>& columns,
                                        std::span<const double> row);

std::string save_model(const TrainedModel& m);
TrainedModel load_model(std::string_view text);
void save_model_file(const TrainedModel& m, const std::filesystem::path& file);
TrainedModel load_model_file(const std::filesystem::path& file);

namespace mlp {

std::size_t parameter_count(std::size_t inputs, const MlpConfig& c) noexcept;

MlpParams init_params(std::size_t inputs, const MlpConfig& c, Rng& rng);

// Probability of pleasant for one normalized row, inference mode.
double forward(const MlpParams& p, std::span<const double> x);

// Mean binary cross-entropy over the rows of `x` (row-major, p.inputs
// wide). When `grad` is non-null it receives d loss / d weights. When
// `dropout_rng` is non-null inverted dropout is applied after the first
// hidden layer.
double loss_and_gradient(const MlpParams& p, std::span<const double> x,
                         std::span<const double> y, std::vector<double>* grad,
                         double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

}  // namespace mlp

DecisionTree fit_decision_tree(const FeatureMatrix& normalized, const TreeConfig& config,
                               Rng* feature_rng = nullptr,
                               std::span<const std::size_t> rows = {});

}  // namespace emowatch
