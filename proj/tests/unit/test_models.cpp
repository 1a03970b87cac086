#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "emowatch/errors.hpp"
#include "emowatch/models.hpp"
#include "oracles.hpp"

using namespace emowatch;

namespace {

FeatureMatrix matrix(const std::vector<std::vector<double>>& rows, const std::vector<int>& pleasant) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < rows.at(0).size(); ++c) names.push_back("f" + std::to_string(c));
  FeatureMatrix m(names);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    m.append_row(rows[r], pleasant[r] ? BinaryMood::pleasant : BinaryMood::unpleasant, "g" + std::to_string(r));
  }
  return m;
}

FeatureMatrix random_matrix(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : rows[i]) v = g(rng);
    y[i] = rows[i][0] + 0.5 * rows[i][1 % d] + 0.3 * g(rng) > 0;
  }
  y[0] = 1;
  y[1] = 0;
  return matrix(rows, y);
}

double train_accuracy(const TrainedModel& m, const FeatureMatrix& x) {
  int right = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) right += predict(m, x.row(r)) == x.labels()[r];
  return static_cast<double>(right) / static_cast<double>(x.rows());
}

// Four point-mass clusters, so the only candidate thresholds sit between
// clusters. Uneven sizes give the centre split a positive Gini gain.
FeatureMatrix xor_quadrants() {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  const int sizes[4] = {4, 6, 5, 5};  // --, ++, +-, -+
  const double sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, 1, -1, 1};
  for (int q = 0; q < 4; ++q) {
    for (int i = 0; i < sizes[q]; ++i) {
      rows.push_back({sx[q], sy[q]});
      y.push_back(sx[q] * sy[q] > 0);
    }
  }
  return matrix(rows, y);
}

}  // namespace

TEST(Normalizer, ZeroMeanUnitStd) {
  const auto x = random_matrix(1, 40, 3);
  FeatureMatrix withconst({"a", "k"});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    withconst.append_row(std::vector<double>{x.at(r, 0) * 7 + 3, 5.0}, x.labels()[r], "g");
  }
  const auto n = Normalizer::fit(withconst);
  const auto z = n.transform(withconst);
  double mean = 0, sq = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) mean += z.at(r, 0) / z.rows();
  for (std::size_t r = 0; r < z.rows(); ++r) sq += (z.at(r, 0) - mean) * (z.at(r, 0) - mean) / z.rows();
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-9);
  for (std::size_t r = 0; r < z.rows(); ++r) EXPECT_EQ(z.at(r, 1), 0.0);
}

TEST(LogReg, ZeroEpochsGivesHalf) {
  ModelConfig c;
  c.logreg.epochs = 0;
  const auto x = random_matrix(2, 20, 2);
  const auto m = fit(ModelKind::logreg, x, c, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_EQ(predict_proba(m, x.row(r)), 0.5);
}

TEST(LogReg, SeparableOneDimension) {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({-1.0});
    y.push_back(0);
    rows.push_back({1.0});
    y.push_back(1);
  }
  const auto x = matrix(rows, y);
  EXPECT_EQ(train_accuracy(fit(ModelKind::logreg, x, {}, 0), x), 1.0);
}

TEST(Gnb, TwoMeanExample) {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({0.0});
    y.push_back(0);
    rows.push_back({10.0});
    y.push_back(1);
  }
  const auto m = fit(ModelKind::gnb, matrix(rows, y), {}, 0);
  EXPECT_EQ(predict(m, std::vector<double>{2.0}), BinaryMood::unpleasant);
  EXPECT_EQ(predict(m, std::vector<double>{8.0}), BinaryMood::pleasant);
  // Normalized: class means -1 and +1, variances at the 1e-9 floor.
  const double z = (2.0 - 5.0) / 5.0;
  EXPECT_NEAR(predict_proba(m, std::vector<double>{2.0}), oracle::gaussian_nb_posterior(z, 0.5, 1, 1e-9, -1, 1e-9),
              1e-12);
}

TEST(Gnb, MatchesHandPosterior) {
  const std::vector<double> u{0, 1, 2, 1.5}, p{8, 10, 12};
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (double v : u) rows.push_back({v}), y.push_back(0);
  for (double v : p) rows.push_back({v}), y.push_back(1);
  const auto m = fit(ModelKind::gnb, matrix(rows, y), {}, 0);

  std::vector<double> all(u);
  all.insert(all.end(), p.begin(), p.end());
  double mu = 0, var = 0;
  for (double v : all) mu += v / all.size();
  for (double v : all) var += (v - mu) * (v - mu) / all.size();
  const double sd = std::sqrt(var);
  auto stats = [&](const std::vector<double>& v) {
    double m1 = 0, v1 = 0;
    for (double a : v) m1 += (a - mu) / sd / v.size();
    for (double a : v) v1 += ((a - mu) / sd - m1) * ((a - mu) / sd - m1) / v.size();
    return std::pair{m1, v1};
  };
  const auto [mp, vp] = stats(p);
  const auto [mu0, vu] = stats(u);
  for (double q : {-1.0, 3.0, 5.0, 6.5, 9.0}) {
    const double want = oracle::gaussian_nb_posterior((q - mu) / sd, 3.0 / 7.0, mp, vp, mu0, vu);
    EXPECT_NEAR(predict_proba(m, std::vector<double>{q}), want, 1e-9) << q;
  }
}

TEST(Knn, MatchesBruteForceScan) {
  const auto x = random_matrix(3, 200, 4);
  const auto m = fit(ModelKind::knn, x, {}, 0);
  const auto z = m.normalizer.transform(x);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    rows.emplace_back(z.row(r).begin(), z.row(r).end());
    labels.push_back(z.labels()[r] == BinaryMood::pleasant);
  }
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1.5);
  for (int q = 0; q < 200; ++q) {
    std::vector<double> query(4);
    for (auto& v : query) v = g(rng);
    const auto zq = m.normalizer.transform(std::span<const double>(query));
    EXPECT_EQ(predict_proba(m, query), oracle::knn_fraction(rows, labels, zq, 5));
  }
}

TEST(Knn, KOneReturnsOwnLabelAndEvenTieIsUnpleasant) {
  ModelConfig c;
  c.knn.k = 1;
  const auto x = random_matrix(5, 30, 2);
  const auto m = fit(ModelKind::knn, x, c, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    EXPECT_EQ(predict_proba(m, x.row(r)), x.labels()[r] == BinaryMood::pleasant ? 1.0 : 0.0);
  }
  c.knn.k = 2;
  const auto two = fit(ModelKind::knn, matrix({{0.0}, {1.0}}, {1, 0}), c, 0);
  EXPECT_EQ(predict_proba(two, std::vector<double>{0.5}), 0.5);
  EXPECT_EQ(predict(two, std::vector<double>{0.5}), BinaryMood::unpleasant);
}

TEST(Tree, PureInputIsSingleLeaf) {
  FeatureMatrix z = matrix({{1.0}, {2.0}, {3.0}}, {1, 1, 1});
  const auto t = fit_decision_tree(z, {});
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].pleasant_fraction, 1.0);
}

TEST(Tree, PerfectSplitHasPureChildren) {
  const auto t = fit_decision_tree(matrix({{0.0}, {1.0}, {2.0}, {3.0}}, {1, 1, 0, 0}), {});
  ASSERT_EQ(t.nodes.size(), 3u);
  EXPECT_EQ(t.nodes[0].threshold, 1.5);
  EXPECT_EQ(t.nodes[1].pleasant_fraction, 1.0);
  EXPECT_EQ(t.nodes[2].pleasant_fraction, 0.0);
}

TEST(Tree, TieGoesToLowestFeature) {
  // Both columns separate the labels equally well.
  const auto t = fit_decision_tree(matrix({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {1, 1, 0, 0}), {});
  EXPECT_EQ(t.nodes[0].feature, 0);
}

TEST(Tree, DepthTwoFitsXor) {
  const auto x = xor_quadrants();
  ModelConfig c;
  c.dtree.max_depth = 2;
  const auto m = fit(ModelKind::dtree, x, c, 0);
  EXPECT_EQ(train_accuracy(m, x), 1.0);
  EXPECT_EQ(std::get<DecisionTree>(m.params).depth(), 2u);
}

TEST(Forest, SingleTreeWithoutRandomnessIsDecisionTree) {
  ModelConfig c;
  c.rforest.trees = 1;
  c.rforest.bootstrap = false;
  c.rforest.feature_subsample = false;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = random_matrix(10 + seed, 60, 5);
    const auto rf = fit(ModelKind::rforest, x, c, seed);
    const auto dt = fit(ModelKind::dtree, x, c, seed);
    const auto probe = random_matrix(100 + seed, 300, 5);
    for (std::size_t r = 0; r < probe.rows(); ++r) {
      EXPECT_EQ(predict(rf, probe.row(r)), predict(dt, probe.row(r)));
    }
  }
}

TEST(Forest, ProbabilityIsRecountedVoteShare) {
  ModelConfig c;
  c.rforest.trees = 25;
  const auto x = random_matrix(20, 80, 6);
  const auto m = fit(ModelKind::rforest, x, c, 3);
  const auto& f = std::get<ForestParams>(m.params);
  const auto probe = random_matrix(21, 100, 6);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    const auto z = m.normalizer.transform(probe.row(r));
    int votes = 0;
    for (const auto& t : f.trees) votes += t.predict_proba(z) >= 0.5;
    EXPECT_EQ(predict_proba(m, probe.row(r)), votes / 25.0);
  }
}

TEST(Forest, IndependentOfJobs) {
  const auto x = random_matrix(30, 70, 8);
  const auto a = fit(ModelKind::rforest, x, {}, 9, {1});
  const auto b = fit(ModelKind::rforest, x, {}, 9, {4});
  EXPECT_EQ(save_model(a), save_model(b));
}

TEST(Fit, RejectsSingleClassAndUnsupported) {
  const auto one = matrix({{1.0}, {2.0}}, {1, 1});
  for (auto k : {ModelKind::logreg, ModelKind::dtree, ModelKind::rforest, ModelKind::gnb, ModelKind::knn,
                 ModelKind::mlp}) {
    EXPECT_THROW(fit(k, one, {}, 0), DegenerateLabelError) << to_string(k);
  }
  EXPECT_THROW(fit(ModelKind::svm, random_matrix(1, 10, 2), {}, 0), UnsupportedModelError);
  EXPECT_FALSE(is_supported(ModelKind::xgboost));
}

TEST(Fit, WidthMismatchIsShapeError) {
  const auto m = fit(ModelKind::logreg, random_matrix(1, 10, 2), {}, 0);
  EXPECT_THROW(predict_proba(m, std::vector<double>{1.0}), ShapeError);
}

TEST(Mlp, ParameterCount) {
  EXPECT_EQ(mlp::parameter_count(49, MlpConfig{}), 1873u);
  EXPECT_EQ(mlp::parameter_count(49, MlpConfig{}), 32u * 50 + 8 * 33 + 9);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const std::size_t d = 6, n = 10;
  auto p = mlp::init_params(d, MlpConfig{}, rng);
  for (auto& w : p.weights) w += 0.05 * (uniform01(rng) - 0.5);  // non-zero biases too
  std::vector<double> x(n * d), y(n);
  for (auto& v : x) v = 2.0 * uniform01(rng) - 1.0;
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 2;
  std::vector<double> grad;
  mlp::loss_and_gradient(p, x, y, &grad);
  const double h = 1e-5;  // smaller steps lose tiny gradients to cancellation
  double worst = 0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    auto q = p;
    q.weights[i] += h;
    const double up = mlp::loss_and_gradient(q, x, y, nullptr);
    q.weights[i] -= 2 * h;
    const double down = mlp::loss_and_gradient(q, x, y, nullptr);
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-7});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Mlp, InferenceIgnoresDropout) {
  const auto x = random_matrix(40, 30, 4);
  ModelConfig c;
  c.mlp.epochs = 20;
  const auto m = fit(ModelKind::mlp, x, c, 1);
  for (std::size_t r = 0; r < x.rows(); ++r) EXPECT_EQ(predict_proba(m, x.row(r)), predict_proba(m, x.row(r)));
  EXPECT_EQ(save_model(fit(ModelKind::mlp, x, c, 1)), save_model(m));
}

TEST(Mlp, CurvesAreFiniteAndSmoothedAccuracyDoesNotDrop) {
  // Well separated two-class data.
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 1);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 64; ++i) {
    const int c = i % 2;
    rows.push_back({(c ? 3.0 : -3.0) + g(rng), g(rng), (c ? 2.0 : -2.0) + g(rng)});
    y.push_back(c);
  }
  const auto x = matrix(rows, y);
  TrainingCurve curve;
  fit_mlp(x, {}, 0, &x, &curve);
  ASSERT_EQ(curve.train_loss.size(), 200u);
  for (double l : curve.train_loss) EXPECT_TRUE(std::isfinite(l));
  const std::size_t w = 20;
  std::vector<double> smooth;
  for (std::size_t e = 0; e + w <= curve.train_accuracy.size(); ++e) {
    double s = 0;
    for (std::size_t k = e; k < e + w; ++k) s += curve.train_accuracy[k];
    smooth.push_back(s / w);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_GE(smooth[i], smooth[i - 1] - 1e-9) << i;
  EXPECT_GE(curve.train_accuracy.back(), 95.0);
}

TEST(ModelFile, LogRegWeightsBitExact) {
  const auto x = random_matrix(50, 40, 3);
  const auto m = fit(ModelKind::logreg, x, {}, 0);
  const auto back = load_model(save_model(m));
  EXPECT_EQ(std::get<LogRegParams>(back.params), std::get<LogRegParams>(m.params));
  EXPECT_EQ(back.normalizer, m.normalizer);
  EXPECT_EQ(save_model(back), save_model(m));
}

TEST(ModelFile, ForestPredictionsSurviveRoundTrip) {
  const auto x = random_matrix(51, 60, 5);
  const auto m = fit(ModelKind::rforest, x, {}, 2);
  const auto back = load_model(save_model(m));
  ASSERT_EQ(std::get<ForestParams>(back.params).trees.size(), 100u);
  const auto probe = random_matrix(52, 1000, 5);
  for (std::size_t r = 0; r < probe.rows(); ++r) {
    EXPECT_EQ(predict_proba(back, probe.row(r)), predict_proba(m, probe.row(r)));
  }
}

TEST(ModelFile, EveryKindRoundTrips) {
  const auto x = random_matrix(53, 30, 3);
  ModelConfig c;
  c.mlp.epochs = 5;
  for (auto k : {ModelKind::logreg, ModelKind::dtree, ModelKind::rforest, ModelKind::gnb, ModelKind::knn,
                 ModelKind::mlp}) {
    const auto m = fit(k, x, c, 4);
    const auto back = load_model(save_model(m));
    EXPECT_EQ(back.kind, k);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(save_model(back), save_model(m)) << to_string(k);
  }
}

TEST(ModelFile, TruncatedOrForeignInputIsFormatError) {
  const std::string text = save_model(fit(ModelKind::rforest, random_matrix(54, 30, 3), {}, 0));
  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 2, text.size() - 3}) {
    EXPECT_THROW(load_model(text.substr(0, cut)), FormatError) << cut;
  }
  EXPECT_THROW(load_model(R"({"format":"something-else","version":1})"), FormatError);
  std::string bumped = text;
  bumped.replace(bumped.find("\"version\": 1"), 12, "\"version\": 99");
  EXPECT_THROW(load_model(bumped), FormatError);
}

TEST(TrainModel, PcaPipelineUsesRawColumns) {
  const auto x = random_matrix(60, 50, 6);
  FeatureSetSpec spec;
  spec.hr = spec.hrv = spec.acc = spec.gyro = true;
  // Columns f0..f5 have no sensor group; build a named matrix instead.
  FeatureMatrix named({"hr_mean", "hr_std", "acc_x_mean", "acc_y_mean", "gyro_x_mean", "sdnn"});
  for (std::size_t r = 0; r < x.rows(); ++r) named.append_row(x.row(r), x.labels()[r], x.group_ids()[r]);
  spec.pca_components = 3;
  const auto m = train_model(ModelKind::logreg, named, spec, {}, 0);
  EXPECT_EQ(m.input_width(), 6u);
  ASSERT_TRUE(m.pca);
  EXPECT_EQ(m.pca->components.size(), 3u);
  const auto back = load_model(save_model(m));
  for (std::size_t r = 0; r < named.rows(); ++r) {
    EXPECT_EQ(predict_proba(back, named.row(r)), predict_proba(m, named.row(r)));
  }
}
