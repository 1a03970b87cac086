#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "emowatch/errors.hpp"
#include "emowatch/features.hpp"
#include "oracles.hpp"

using namespace emowatch;

namespace {

std::vector<HrReading> readings(const std::vector<double>& bpm) {
  std::vector<HrReading> out;
  for (std::size_t i = 0; i < bpm.size(); ++i) out.push_back({static_cast<std::int64_t>(i) * 1000, bpm[i]});
  return out;
}

void expect_rel(double got, double want, double tol = 1e-9) {
  EXPECT_LE(std::abs(got - want), tol * std::max(1.0, std::abs(want))) << got << " vs " << want;
}

SessionRecording session(const std::vector<double>& bpm, EmotionLabel e = EmotionLabel::joy,
                         Gender g = Gender::female) {
  SessionRecording r;
  r.meta = {"f", 33, g, std::nullopt};
  for (std::size_t i = 0; i < bpm.size(); ++i) {
    const double x = static_cast<double>(i);
    r.samples.push_back({static_cast<std::int64_t>(i) * 1000, bpm[i],
                         {std::sin(x), std::cos(x), 9.8 + 0.1 * x}, {0.1 * x, -0.2, std::sin(2 * x)}});
  }
  r.assessment = SelfAssessment{7, 5, e};
  return r;
}

}  // namespace

TEST(DetectPeaks, StrictInteriorMaxima) {
  EXPECT_EQ(detect_peaks(std::vector<double>{1, 3, 1}), (std::vector<std::size_t>{1}));
  EXPECT_TRUE(detect_peaks(std::vector<double>{1, 2, 3}).empty());
  EXPECT_EQ(detect_peaks(std::vector<double>{0, 2, 2, 0, 5, 0}), (std::vector<std::size_t>{4}));
  EXPECT_TRUE(detect_peaks(std::vector<double>{7}).empty());
}

TEST(NnIntervals, FromBpm) {
  EXPECT_EQ(nn_intervals(readings({60})), (std::vector<double>{1000}));
  EXPECT_EQ(nn_intervals(readings({60, 120})), (std::vector<double>{1000, 500}));
  EXPECT_THROW(nn_intervals(readings({60, 0})), DomainError);
}

TEST(ComputeHrv, HandValues) {
  const auto h = compute_hrv(readings({60, 120}));
  EXPECT_EQ(h.sdnn, 250.0);
  EXPECT_EQ(h.rmssd, 500.0);
  EXPECT_EQ(h.nn50, 1u);
  EXPECT_EQ(h.pnn50, 100.0);
  EXPECT_EQ(h.hr_range, 60.0);
}

TEST(ComputeHrv, ConstantSeries) {
  const auto h = compute_hrv(readings({60, 60, 60, 60}));
  EXPECT_EQ(h.sdnn, 0.0);
  EXPECT_EQ(h.rmssd, 0.0);
  EXPECT_EQ(h.nn50, 0u);
  EXPECT_EQ(h.pnn50, 0.0);
  EXPECT_EQ(h.hr_range, 0.0);
  EXPECT_FALSE(h.sdnn_from_empty);
}

TEST(ComputeHrv, EmptyCleanedSetFlagsSdnn) {
  const auto h = compute_hrv(readings({20, 25}));  // 3000 ms and 2400 ms, both outside the window
  EXPECT_TRUE(h.sdnn_from_empty);
  EXPECT_EQ(h.sdnn, 0.0);
}

TEST(ComputeHrv, NeedsTwoReadings) { EXPECT_THROW(compute_hrv(readings({70})), InsufficientDataError); }

TEST(ComputeHrv, MatchesOracleOnRandomSeries) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> bpm(20.0, 220.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> series(2 + rng() % 120);
    for (auto& b : series) b = bpm(rng);
    const auto h = compute_hrv(readings(series));
    const auto o = oracle::hrv(series);
    expect_rel(h.sdnn, o.sdnn);
    expect_rel(h.rmssd, o.rmssd);
    EXPECT_EQ(static_cast<double>(h.nn50), o.nn50);
    expect_rel(h.pnn50, o.pnn50);
    expect_rel(h.hr_range, o.hr_range);
  }
}

TEST(ChannelStats, Examples) {
  auto s = channel_stats(std::vector<double>{1.0, 1.0, 2.0});
  EXPECT_EQ(s.mode, 1.0);
  EXPECT_DOUBLE_EQ(s.mean, 4.0 / 3.0);
  EXPECT_EQ(s.median, 1.0);
  EXPECT_EQ(channel_stats(std::vector<double>{1.0, 2.0}).mode, 1.0);
  EXPECT_EQ(channel_stats(std::vector<double>{1.004, 1.001, 2.0}).mode, 1.0);
  EXPECT_EQ(channel_stats(std::vector<double>{4, 1, 3, 2}).median, 2.5);
  s = channel_stats(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.std, 2.0);
  EXPECT_EQ(s.min, 2.0);
  EXPECT_EQ(s.max, 9.0);
}

TEST(ChannelStats, OrderingInvariants) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1e3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> x(1 + rng() % 30);
    for (auto& v : x) v = n(rng);
    const auto s = channel_stats(x);
    EXPECT_LE(s.min, s.mean);
    EXPECT_LE(s.mean, s.max);
    EXPECT_LE(s.min, s.median);
    EXPECT_LE(s.median, s.max);
    EXPECT_GE(s.std, 0.0);
    EXPECT_LE(s.peak_count, (x.size() - 1) / 2);
  }
}

TEST(StatisticalRow, LayoutAndLabel) {
  EXPECT_EQ(statistical_column_names().size(), kStatisticalColumns);
  EXPECT_EQ(statistical_column_names().front(), "hr_mean");
  const auto row = build_statistical_row(session({60, 70, 80, 75, 65}, EmotionLabel::anger));
  ASSERT_EQ(row.values.size(), 57u);
  EXPECT_EQ(row.label, BinaryMood::unpleasant);
  for (double v : row.values) EXPECT_TRUE(std::isfinite(v));
  const auto& cols = statistical_column_names();
  auto at = [&](const char* name) {
    return row.values[static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin())];
  };
  EXPECT_EQ(at("age"), 33.0);
  EXPECT_EQ(at("gender_male"), 0.0);
  EXPECT_EQ(at("gender_female"), 1.0);
  EXPECT_EQ(at("hr_range"), 20.0);
  EXPECT_EQ(at("hr_max"), 80.0);
}

TEST(StatisticalRow, ConstantSignalZeroesSpreadColumns) {
  SessionRecording r;
  r.meta = {"c", 40, Gender::other, std::nullopt};
  for (int i = 0; i < 10; ++i) r.samples.push_back({i * 1000, 70.0, {0, 0, 9.8}, {0, 0, 0}});
  r.assessment = SelfAssessment{5, 5, EmotionLabel::trust};
  const auto row = build_statistical_row(r);
  const auto& cols = statistical_column_names();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& n = cols[c];
    const bool spread = n.ends_with("_std") || n.ends_with("_peaks") || n == "sdnn" || n == "rmssd" ||
                        n == "nn50" || n == "pnn50" || n == "hr_range";
    if (spread) EXPECT_EQ(row.values[c], 0.0) << n;
  }
}

TEST(StatisticalRow, PermutationOnlyMovesOrderDependentColumns) {
  auto r = session({61, 75, 90, 66, 80, 72, 101, 58});
  std::vector<double> hr;
  for (auto& s : r.samples) hr.push_back(*s.hr_bpm);
  const auto a = build_statistical_row(r).values;
  std::mt19937_64 rng(2);
  std::vector<std::size_t> perm(r.samples.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto shuffled = r;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.samples[i] = r.samples[perm[i]];
    shuffled.samples[i].t_ms = static_cast<std::int64_t>(i) * 1000;
  }
  const auto b = build_statistical_row(shuffled).values;
  const auto& cols = statistical_column_names();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto& n = cols[c];
    if (n.ends_with("_peaks") || n == "rmssd" || n == "nn50" || n == "pnn50") continue;
    EXPECT_NEAR(a[c], b[c], 1e-9 * std::max(1.0, std::abs(a[c]))) << n;
  }
}

TEST(StatisticalRow, RequiresAssessment) {
  auto r = session({60, 70});
  r.assessment.reset();
  EXPECT_THROW(build_statistical_row(r), DataError);
  EXPECT_THROW(build_statistical_row(session({60})), InsufficientDataError);
}

TEST(NonStatisticalRows, OneRowPerSampleWithCarriedHr) {
  auto r = session({60, 70, 80});
  r.samples.push_back({3000, std::nullopt, {0, 0, 9.8}, {0, 0, 0}});
  const auto m = build_nonstatistical_rows(r);
  EXPECT_EQ(m.cols(), kNonStatisticalColumns);
  ASSERT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.at(3, 0), 80.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    EXPECT_EQ(m.labels()[i], BinaryMood::pleasant);
    EXPECT_EQ(m.group_ids()[i], "f");
  }
}

TEST(BuildDataset, IndependentOfJobs) {
  std::vector<SessionRecording> corpus;
  for (int i = 0; i < 12; ++i) {
    auto r = session({60.0 + i, 70, 80 - i * 0.5, 75, 65}, i % 2 ? EmotionLabel::fear : EmotionLabel::joy);
    r.meta.session_id = "s" + std::to_string(i);
    corpus.push_back(r);
  }
  for (auto flavor : {DatasetFlavor::statistical, DatasetFlavor::nonstatistical}) {
    const auto one = build_dataset(corpus, flavor, 1);
    const auto four = build_dataset(corpus, flavor, 4);
    EXPECT_EQ(one, four);
    EXPECT_EQ(write_feature_csv(one), write_feature_csv(four));
  }
  EXPECT_EQ(build_dataset(corpus, DatasetFlavor::nonstatistical).rows(), 60u);
}

TEST(FeatureMatrix, CsvRoundTrip) {
  std::vector<SessionRecording> corpus{session({60, 70, 80}), session({90, 95, 91}, EmotionLabel::sadness)};
  corpus[1].meta.session_id = "g";
  const auto m = build_dataset(corpus, DatasetFlavor::statistical);
  EXPECT_EQ(parse_feature_csv(write_feature_csv(m)), m);
}

TEST(FeatureMatrix, RejectsBadRows) {
  FeatureMatrix m({"a", "b"});
  EXPECT_THROW(m.append_row(std::vector<double>{1.0}, BinaryMood::pleasant, "x"), ShapeError);
  EXPECT_THROW(m.append_row(std::vector<double>{1.0, std::nan("")}, BinaryMood::pleasant, "x"), DomainError);
}

TEST(FeatureSets, ParseAndName) {
  const auto all = parse_feature_set("Hrv,Hr,Acc,Gyro");
  EXPECT_TRUE(all.hr && all.hrv && all.acc && all.gyro);
  EXPECT_EQ(parse_feature_set("all"), all);
  const auto s = parse_feature_set("Acc, Gyro (without age & gender)");
  EXPECT_TRUE(s.acc && s.gyro && !s.hr && s.without_age && s.without_gender);
  EXPECT_EQ(parse_feature_set(s.name()), s);
  EXPECT_EQ(parse_feature_set("PCA(3)").pca_components, 3u);
  EXPECT_THROW(parse_feature_set("Heart"), SpecError);
}

TEST(FeatureSets, TableRowsRoundTripThroughNames) {
  EXPECT_EQ(statistical_feature_sets().size(), 17u);
  EXPECT_EQ(nonstatistical_feature_sets().size(), 7u);
  for (const auto& fs : statistical_feature_sets()) EXPECT_EQ(parse_feature_set(fs.name()), fs) << fs.name();
  for (const auto& fs : nonstatistical_feature_sets()) EXPECT_EQ(parse_feature_set(fs.name()), fs) << fs.name();
}

TEST(SelectFeatures, ColumnCounts) {
  const auto m = build_dataset(std::vector<SessionRecording>{session({60, 70, 80})}, DatasetFlavor::statistical);
  EXPECT_EQ(select_features(m, parse_feature_set("Hrv,Hr,Acc,Gyro")).cols(), 57u);
  EXPECT_EQ(select_features(m, parse_feature_set("Acc, Gyro (without gender)")).cols(), 43u);
  EXPECT_EQ(select_features(m, parse_feature_set("Hrv (without age & gender)")).cols(), 5u);
  const auto nomm = select_features(m, parse_feature_set("Hrv,Hr,Acc,Gyro (without median & mode)"));
  EXPECT_EQ(nomm.cols(), 57u - 14u);
}

TEST(SelectFeatures, IdempotentSubsequence) {
  const auto m = build_dataset(std::vector<SessionRecording>{session({60, 70, 80})}, DatasetFlavor::statistical);
  for (const auto& fs : statistical_feature_sets()) {
    const auto once = select_features(m, fs);
    EXPECT_EQ(select_features(once, fs), once);
    std::size_t j = 0;
    for (const auto& c : m.column_names())
      if (j < once.cols() && once.column_names()[j] == c) ++j;
    EXPECT_EQ(j, once.cols());
  }
}

TEST(SelectFeatures, EmptySelectionIsSpecError) {
  FeatureMatrix m({"age", "gender_male"});
  m.append_row(std::vector<double>{30, 1}, BinaryMood::pleasant, "a");
  EXPECT_THROW(select_features(m, parse_feature_set("Hr")), SpecError);
}

TEST(Pca, OrthonormalDescending) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  FeatureMatrix m({"a", "b", "c", "d"});
  for (int i = 0; i < 50; ++i) {
    const double z = n(rng);
    m.append_row(std::vector<double>{z, 2 * z + 0.1 * n(rng), n(rng), 0.5 * n(rng)}, BinaryMood::pleasant, "g");
  }
  const auto p = fit_pca(m, 3);
  ASSERT_EQ(p.components.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < 4; ++k) dot += p.components[i][k] * p.components[j][k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-9);
    }
    if (i) EXPECT_GE(p.eigenvalues[i - 1], p.eigenvalues[i]);
    const auto& c = p.components[i];
    const auto big = *std::max_element(c.begin(), c.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    EXPECT_GT(big, 0.0);
  }
  const auto out = apply_pca(p, m);
  EXPECT_EQ(out.cols(), 3u);
  EXPECT_EQ(out.column_names()[0], "pc1");
  EXPECT_THROW(fit_pca(m, 5), SpecError);
}

TEST(Pca, RankOneDataKeepsDistances) {
  FeatureMatrix m({"a", "b"});
  const std::vector<double> xs{-3, -1, 0, 2, 5, 8};
  for (double x : xs) m.append_row(std::vector<double>{x, 0.0}, BinaryMood::pleasant, "g");
  const auto p = fit_pca(m, 1);
  const auto out = apply_pca(p, m);
  // Standardization scales by the column std, so compare against scaled distances.
  double mean = 0, var = 0;
  for (double x : xs) mean += x / xs.size();
  for (double x : xs) var += (x - mean) * (x - mean) / xs.size();
  const double sd = std::sqrt(var);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < xs.size(); ++j) {
      EXPECT_NEAR(std::abs(out.at(i, 0) - out.at(j, 0)), std::abs(xs[i] - xs[j]) / sd, 1e-9);
    }
  }
}
