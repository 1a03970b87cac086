#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emowatch/features.hpp"
#include "emowatch/models.hpp"
#include "emowatch/types.hpp"

namespace emowatch {

struct SplitPlan {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

// Per class: seeded shuffle, then the first round-half-up(fraction * count)
// indices (at least one) go to test. Throws DegenerateLabelError when a class
// is missing and SpecError for a fraction outside (0, 1).
SplitPlan stratified_split(std::span<const BinaryMood> labels, double test_fraction,
                           std::uint64_t seed);

// Most frequent label; an exact tie is unpleasant. Throws DomainError when empty.
BinaryMood majority_vote(std::span<const BinaryMood> predictions);

// Percentage of groups whose majority-vote prediction matches the group's
// label. Groups are keyed by id. Throws DataError when a group carries two
// different true labels.
double custom_accuracy(std::span<const BinaryMood> predictions, std::span<const BinaryMood> labels,
                       std::span<const std::string> group_ids);

double standard_accuracy(std::span<const BinaryMood> predictions, std::span<const BinaryMood> labels);

// Splits a dataset. Statistical datasets split rows; non-statistical datasets
// split whole sessions (group ids) so no session lands on both sides.
SplitPlan split_dataset(const FeatureMatrix& data, DatasetFlavor flavor, double test_fraction,
                        std::uint64_t seed);

struct CellResult {
  FeatureSetSpec feature_set;
  ModelKind model = ModelKind::logreg;
  bool supported = true;
  std::vector<double> test_accuracy;   // percent, one per repeat
  std::vector<double> train_accuracy;  // percent, one per repeat
  double mean_test = 0.0;
  double mean_train = 0.0;
};

struct EvalReport {
  DatasetFlavor flavor = DatasetFlavor::statistical;
  std::vector<FeatureSetSpec> feature_sets;
  std::vector<ModelKind> models;
  std::size_t repeats = 0;
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;  // row-major: feature set x model

  const CellResult& cell(std::size_t feature_set, std::size_t model) const {
    return cells[feature_set * models.size() + model];
  }
};

struct AblationConfig {
  DatasetFlavor flavor = DatasetFlavor::statistical;
  std::vector<FeatureSetSpec> feature_sets;
  std::vector<ModelKind> models;
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  ModelConfig model_config;
  unsigned jobs = 1;  // grid cells in parallel; the report does not depend on it
};

// Table-order defaults for each flavor.
std::vector<ModelKind> default_models(DatasetFlavor flavor);
AblationConfig default_ablation(DatasetFlavor flavor);

// Repeat r splits with seed + r and fits every model on every feature set.
// Statistical flavor scores plain accuracy, non-statistical scores
// custom_accuracy. Unsupported models yield cells marked unsupported.
EvalReport run_ablation(const FeatureMatrix& dataset, const AblationConfig& config);
EvalReport run_ablation(std::span<const SessionRecording> corpus, const AblationConfig& config);

// feature_set,model,supported,mean_test_accuracy,mean_train_accuracy,test_accuracy_by_repeat
std::string write_report_csv(const EvalReport& report);
// Aligned text grid: feature sets down, models across, mean test accuracy.
std::string write_report_table(const EvalReport& report);

struct GroupMeans {
  std::string dimension;  // "age_group", "gender", "emotion", "mood"
  std::string category;
  std::size_t sessions = 0;
  std::size_t samples = 0;
  double mean_hr = 0.0;    // over samples that carry a reading
  double mean_acc = 0.0;   // mean |acc|
  double mean_gyro = 0.0;  // mean |gyro|
};

struct GroupSummary {
  std::vector<GroupMeans> rows;

  // Categories of `dimension` ordered by the measure, highest first.
  // measure is one of "hr", "acc", "gyro".
  std::vector<std::string> ranking(const std::string& dimension, const std::string& measure) const;
};

// Means over cleaned samples per age group, gender, self-reported emotion
// and binary mood.
GroupSummary group_summary(std::span<const SessionRecording> corpus);

std::string write_summary_csv(const GroupSummary& s);
std::string write_summary_text(const GroupSummary& s);

struct SessionPrediction {
  BinaryMood mood = BinaryMood::unpleasant;
  double probability = 0.0;  // of pleasant
  std::vector<std::string> features_used;
  std::size_t rows = 1;      // instances voted over on the non-statistical path
};

// Cleans and featurizes one recording and runs the model on it. The
// statistical path predicts from the session row; the non-statistical path
// predicts every sample, takes the majority vote and reports the mean
// probability. Throws InsufficientDataError with fewer than two HR readings.
SessionPrediction predict_session(const TrainedModel& model, const SessionRecording& recording,
                                  DatasetFlavor path = DatasetFlavor::statistical);

}  // namespace emowatch
