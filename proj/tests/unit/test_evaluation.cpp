#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "emowatch/errors.hpp"
#include "emowatch/evaluation.hpp"
#include "emowatch/ingestion.hpp"
#include "emowatch/synthesis.hpp"
#include "oracles.hpp"

using namespace emowatch;

namespace {

std::vector<BinaryMood> to_moods(const std::vector<int>& v) {
  std::vector<BinaryMood> out;
  for (int x : v) out.push_back(x ? BinaryMood::pleasant : BinaryMood::unpleasant);
  return out;
}

std::size_t expected_test_count(std::size_t n, double f) {
  const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 0.5 + 1e-9));
  return std::max<std::size_t>(1, k);
}

const std::vector<SessionRecording>& small_corpus() {
  static const auto corpus = [] {
    GeneratorConfig cfg;
    cfg.sessions_per_emotion = 4;
    cfg.duration_s = 40;
    cfg.seed = 11;
    return generate_corpus(cfg);
  }();
  return corpus;
}

}  // namespace

TEST(Split, PropertiesOnRandomLabels) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 200;
    std::vector<int> y(n);
    for (auto& v : y) v = rng() % 2;
    y[0] = 0;
    y[1] = 1;
    const auto labels = to_moods(y);
    const double f = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto plan = stratified_split(labels, f, rng());

    EXPECT_TRUE(std::is_sorted(plan.train.begin(), plan.train.end()));
    EXPECT_TRUE(std::is_sorted(plan.test.begin(), plan.test.end()));
    std::set<std::size_t> all(plan.train.begin(), plan.train.end());
    for (auto i : plan.test) EXPECT_TRUE(all.insert(i).second) << "index on both sides";
    ASSERT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);

    std::size_t pos = 0, test_pos = 0;
    for (int v : y) pos += v;
    for (auto i : plan.test) test_pos += y[i];
    EXPECT_EQ(test_pos, expected_test_count(pos, f));
    EXPECT_EQ(plan.test.size() - test_pos, expected_test_count(n - pos, f));
  }
}

TEST(Split, SeventyEightRowsGiveSixteenTest) {
  std::vector<int> y(78, 0);
  std::fill(y.begin(), y.begin() + 40, 1);
  const auto plan = stratified_split(to_moods(y), 0.2, 5);
  EXPECT_EQ(plan.test.size(), 16u);
  EXPECT_EQ(plan.train.size(), 62u);
}

TEST(Split, DeterministicAndSeedSensitive) {
  std::vector<int> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % 3 == 0;
  const auto labels = to_moods(y);
  EXPECT_EQ(stratified_split(labels, 0.2, 3).test, stratified_split(labels, 0.2, 3).test);
  EXPECT_NE(stratified_split(labels, 0.2, 3).test, stratified_split(labels, 0.2, 4).test);
}

TEST(Split, RejectsBadInput) {
  const auto labels = to_moods({1, 0, 1, 0});
  EXPECT_THROW(stratified_split(labels, 0.0, 1), SpecError);
  EXPECT_THROW(stratified_split(labels, 1.0, 1), SpecError);
  EXPECT_THROW(stratified_split(to_moods({1, 1, 1}), 0.2, 1), DegenerateLabelError);
}

TEST(MajorityVote, CountsAndTies) {
  EXPECT_EQ(majority_vote(to_moods({1, 1, 0})), BinaryMood::pleasant);
  EXPECT_EQ(majority_vote(to_moods({1, 0})), BinaryMood::unpleasant);
  EXPECT_EQ(majority_vote(to_moods({0})), BinaryMood::unpleasant);
  EXPECT_THROW(majority_vote(std::vector<BinaryMood>{}), DomainError);
}

TEST(CustomAccuracy, HandExample) {
  // g1: votes P,P,U truth P -> right. g2: U,U truth P -> wrong. g3: P,U tie -> U, truth U -> right.
  const auto pred = to_moods({1, 1, 0, 0, 0, 1, 0});
  const auto truth = to_moods({1, 1, 1, 1, 1, 0, 0});
  const std::vector<std::string> g{"g1", "g1", "g1", "g2", "g2", "g3", "g3"};
  EXPECT_NEAR(custom_accuracy(pred, truth, g), 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(standard_accuracy(pred, truth), 300.0 / 7.0, 1e-12);
}

TEST(CustomAccuracy, MatchesOracleOnRandomGroups) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t groups = 1 + rng() % 20;
    std::vector<int> truth_of(groups);
    for (auto& t : truth_of) t = rng() % 2;
    std::vector<int> pred, truth;
    std::vector<std::string> ids;
    const std::size_t n = groups + rng() % 100;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t g = i < groups ? i : rng() % groups;
      ids.push_back("s" + std::to_string(g));
      truth.push_back(truth_of[g]);
      pred.push_back(rng() % 2);
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < n; ++i) truth[i] = truth_of[std::stoul(ids[i].substr(1))];
    EXPECT_NEAR(custom_accuracy(to_moods(pred), to_moods(truth), ids), oracle::grouped_accuracy(pred, truth, ids),
                1e-9);
    EXPECT_NEAR(standard_accuracy(to_moods(pred), to_moods(truth)), oracle::plain_accuracy(pred, truth), 1e-9);
  }
}

TEST(CustomAccuracy, ConflictingLabelsAreDataError) {
  const std::vector<std::string> g{"a", "a"};
  EXPECT_THROW(custom_accuracy(to_moods({1, 1}), to_moods({1, 0}), g), DataError);
}

TEST(SplitDataset, NonStatisticalKeepsSessionsTogether) {
  const auto data = build_dataset(small_corpus(), DatasetFlavor::nonstatistical);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto plan = split_dataset(data, DatasetFlavor::nonstatistical, 0.2, seed);
    std::set<std::string> train, test;
    for (auto i : plan.train) train.insert(data.group_ids()[i]);
    for (auto i : plan.test) test.insert(data.group_ids()[i]);
    for (const auto& g : test) EXPECT_EQ(train.count(g), 0u) << g;
    EXPECT_EQ(plan.train.size() + plan.test.size(), data.rows());
    // 16 pleasant and 16 unpleasant sessions -> 3 + 3 test sessions.
    EXPECT_EQ(test.size(), 6u);
  }
}

TEST(Ablation, MeanIsMeanOfRepeatsAndJobsDoNotMatter) {
  AblationConfig cfg = default_ablation(DatasetFlavor::statistical);
  cfg.feature_sets = {cfg.feature_sets[0], cfg.feature_sets[6]};
  cfg.models = {ModelKind::logreg, ModelKind::rforest, ModelKind::svm, ModelKind::knn};
  cfg.repeats = 3;
  cfg.seed = 4;
  cfg.model_config.rforest.trees = 10;
  const auto a = run_ablation(small_corpus(), cfg);
  cfg.jobs = 3;
  const auto b = run_ablation(small_corpus(), cfg);
  EXPECT_EQ(write_report_csv(a), write_report_csv(b));
  ASSERT_EQ(a.cells.size(), 8u);
  for (const auto& c : a.cells) {
    if (!c.supported) {
      EXPECT_EQ(c.model, ModelKind::svm);
      EXPECT_TRUE(c.test_accuracy.empty());
      continue;
    }
    ASSERT_EQ(c.test_accuracy.size(), 3u);
    double s = 0;
    for (double v : c.test_accuracy) {
      s += v;
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    EXPECT_NEAR(c.mean_test, s / 3.0, 1e-9);
  }
  EXPECT_NE(write_report_table(a).find("n/a"), std::string::npos);
}

TEST(Ablation, RepeatUsesSeedPlusIndex) {
  AblationConfig cfg;
  cfg.feature_sets = {statistical_feature_sets()[0]};
  cfg.models = {ModelKind::logreg};
  cfg.repeats = 2;
  cfg.seed = 9;
  const auto two = run_ablation(small_corpus(), cfg);
  cfg.repeats = 1;
  cfg.seed = 10;
  const auto one = run_ablation(small_corpus(), cfg);
  EXPECT_EQ(two.cells[0].test_accuracy[1], one.cells[0].test_accuracy[0]);
}

TEST(Ablation, ReportCsvShape) {
  AblationConfig cfg;
  cfg.feature_sets = {statistical_feature_sets()[7]};
  cfg.models = {ModelKind::gnb};
  cfg.repeats = 2;
  const auto csv = write_report_csv(run_ablation(small_corpus(), cfg));
  EXPECT_EQ(csv.rfind("# flavor=statistical repeats=2 seed=0", 0), 0u);
  EXPECT_NE(csv.find("feature_set,model,supported"), std::string::npos);
}

TEST(Summary, GroupsCoverCorpus) {
  const auto s = group_summary(small_corpus());
  std::size_t mood_sessions = 0, emotion_sessions = 0;
  for (const auto& r : s.rows) {
    if (r.dimension == "mood") mood_sessions += r.sessions;
    if (r.dimension == "emotion") emotion_sessions += r.sessions;
    EXPECT_GT(r.mean_hr, 30.0);
  }
  EXPECT_EQ(mood_sessions, small_corpus().size());
  EXPECT_EQ(emotion_sessions, small_corpus().size());
  // Default profiles: pleasant sessions carry the higher heart rate, unpleasant the higher motion.
  EXPECT_EQ(s.ranking("mood", "hr").front(), "pleasant");
  EXPECT_EQ(s.ranking("mood", "acc").front(), "unpleasant");
  EXPECT_NE(write_summary_csv(s).find("dimension"), std::string::npos);
}

TEST(PredictSession, NeedsTwoHeartRateReadings) {
  const auto data = build_dataset(small_corpus(), DatasetFlavor::statistical);
  const auto m = train_model(ModelKind::logreg, data, statistical_feature_sets()[0], {}, 0);
  SessionRecording r = small_corpus()[0];
  const auto p = predict_session(m, r);
  EXPECT_EQ(p.features_used, m.feature_columns);
  EXPECT_EQ(p.mood, predict_proba(m, gather_model_inputs(m, statistical_column_names(),
                                                        statistical_features(clean_recording(r).first))) >= 0.5
                        ? BinaryMood::pleasant
                        : BinaryMood::unpleasant);
  std::size_t hr = 0;
  for (auto& s : r.samples) {
    if (s.hr_bpm && ++hr > 1) s.hr_bpm.reset();
  }
  EXPECT_THROW(predict_session(m, r), InsufficientDataError);
}
