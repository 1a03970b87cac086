#include "emowatch/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "emowatch/ingestion.hpp"
#include "emowatch/random.hpp"

namespace emowatch {

SplitPlan stratified_split(std::span<const BinaryMood> labels, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw SpecError(fmt::format("test fraction must be in (0, 1), got {}", test_fraction));
  }
  SplitPlan plan;
  plan.test_fraction = test_fraction;
  plan.seed = seed;
  Rng rng(seed);
  for (BinaryMood cls : {BinaryMood::pleasant, BinaryMood::unpleasant}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    if (idx.empty()) {
      throw DegenerateLabelError(fmt::format("no {} rows to stratify", to_string(cls)));
    }
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      std::swap(idx[i], idx[uniform_index(rng, i + 1)]);
    }
    const double want = test_fraction * static_cast<double>(idx.size());
    // Round half up; the epsilon absorbs products such as 0.1 * 5 landing just below .5.
    auto n_test = static_cast<std::size_t>(std::floor(want + 0.5 + 1e-9));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size());
    plan.test.insert(plan.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    plan.train.insert(plan.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

BinaryMood majority_vote(std::span<const BinaryMood> predictions) {
  if (predictions.empty()) throw DomainError("majority vote over no predictions");
  const auto pleasant = std::count(predictions.begin(), predictions.end(), BinaryMood::pleasant);
  const auto unpleasant = static_cast<std::ptrdiff_t>(predictions.size()) - pleasant;
  return pleasant > unpleasant ? BinaryMood::pleasant : BinaryMood::unpleasant;
}

double custom_accuracy(std::span<const BinaryMood> predictions, std::span<const BinaryMood> labels,
                       std::span<const std::string> group_ids) {
  if (predictions.size() != labels.size() || labels.size() != group_ids.size()) {
    throw ShapeError("predictions, labels and group ids differ in length");
  }
  if (labels.empty()) throw DomainError("custom accuracy over no rows");
  struct Group {
    BinaryMood truth;
    std::vector<BinaryMood> votes;
  };
  std::map<std::string_view, Group> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(group_ids[i], Group{labels[i], {}});
    if (!inserted && it->second.truth != labels[i]) {
      throw DataError("group " + group_ids[i] + " has conflicting true labels");
    }
    it->second.votes.push_back(predictions[i]);
  }
  std::size_t correct = 0;
  for (const auto& [id, g] : groups) {
    if (majority_vote(g.votes) == g.truth) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(groups.size());
}

double standard_accuracy(std::span<const BinaryMood> predictions, std::span<const BinaryMood> labels) {
  if (predictions.size() != labels.size()) throw ShapeError("predictions and labels differ in length");
  if (labels.empty()) throw DomainError("accuracy over no rows");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

SplitPlan split_dataset(const FeatureMatrix& data, DatasetFlavor flavor, double test_fraction,
                        std::uint64_t seed) {
  if (flavor == DatasetFlavor::statistical) return stratified_split(data.labels(), test_fraction, seed);

  std::vector<std::string> ids;
  std::vector<BinaryMood> group_labels;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> row_group(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto& id = data.group_ids()[r];
    auto [it, inserted] = index.try_emplace(id, ids.size());
    if (inserted) {
      ids.push_back(id);
      group_labels.push_back(data.labels()[r]);
    } else if (group_labels[it->second] != data.labels()[r]) {
      throw DataError("group " + id + " has conflicting true labels");
    }
    row_group[r] = it->second;
  }
  SplitPlan groups = stratified_split(group_labels, test_fraction, seed);
  std::vector<bool> in_test(ids.size(), false);
  for (std::size_t g : groups.test) in_test[g] = true;

  SplitPlan plan;
  plan.test_fraction = test_fraction;
  plan.seed = seed;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    (in_test[row_group[r]] ? plan.test : plan.train).push_back(r);
  }
  return plan;
}

std::vector<ModelKind> default_models(DatasetFlavor flavor) {
  if (flavor == DatasetFlavor::statistical) {
    return {ModelKind::logreg, ModelKind::dtree, ModelKind::rforest,        ModelKind::gnb,
            ModelKind::svm,    ModelKind::knn,   ModelKind::gradient_boost, ModelKind::adaboost,
            ModelKind::xgboost, ModelKind::mlp};
  }
  return {ModelKind::logreg, ModelKind::dtree,    ModelKind::rforest, ModelKind::gnb,
          ModelKind::knn,    ModelKind::adaboost, ModelKind::mlp,     ModelKind::xgboost};
}

AblationConfig default_ablation(DatasetFlavor flavor) {
  AblationConfig c;
  c.flavor = flavor;
  c.feature_sets = flavor == DatasetFlavor::statistical ? statistical_feature_sets()
                                                        : nonstatistical_feature_sets();
  c.models = default_models(flavor);
  return c;
}

namespace {

struct Score {
  double test;
  double train;
};

std::vector<BinaryMood> predict_all(const TrainedModel& m, const FeatureMatrix& x) {
  std::vector<BinaryMood> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict(m, x.row(r));
  return out;
}

double score(DatasetFlavor flavor, const TrainedModel& m, const FeatureMatrix& x) {
  const auto preds = predict_all(m, x);
  return flavor == DatasetFlavor::statistical ? standard_accuracy(preds, x.labels())
                                              : custom_accuracy(preds, x.labels(), x.group_ids());
}

void assert_no_leakage(const FeatureMatrix& train, const FeatureMatrix& test) {
  std::vector<std::string> a(train.group_ids()), b(test.group_ids());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  if (!both.empty()) throw Error("session " + both.front() + " appears in both train and test");
}

}  // namespace

EvalReport run_ablation(const FeatureMatrix& dataset, const AblationConfig& config) {
  if (config.repeats == 0) throw SpecError("ablation needs at least one repeat");
  if (config.feature_sets.empty() || config.models.empty()) throw SpecError("empty ablation grid");

  EvalReport report;
  report.flavor = config.flavor;
  report.feature_sets = config.feature_sets;
  report.models = config.models;
  report.repeats = config.repeats;
  report.seed = config.seed;

  const std::size_t n_fs = config.feature_sets.size();
  const std::size_t n_models = config.models.size();

  // Selected (and for PCA, projected) train/test matrices per repeat and feature set.
  struct Prepared {
    FeatureMatrix train, test;
  };
  std::vector<SplitPlan> plans;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    plans.push_back(split_dataset(dataset, config.flavor, config.test_fraction, config.seed + r));
  }
  std::vector<Prepared> prepared(config.repeats * n_fs);
  std::vector<FeatureMatrix> selected;
  for (const auto& fs : config.feature_sets) selected.push_back(select_features(dataset, fs));
  for (std::size_t r = 0; r < config.repeats; ++r) {
    for (std::size_t f = 0; f < n_fs; ++f) {
      auto& p = prepared[r * n_fs + f];
      p.train = selected[f].subset_rows(plans[r].train);
      p.test = selected[f].subset_rows(plans[r].test);
      if (config.flavor == DatasetFlavor::nonstatistical) assert_no_leakage(p.train, p.test);
      if (const auto k = config.feature_sets[f].pca_components) {
        const PcaModel pca = fit_pca(p.train, *k);
        p.train = apply_pca(pca, p.train);
        p.test = apply_pca(pca, p.test);
      }
    }
  }

  const std::size_t n_jobs = config.repeats * n_fs * n_models;
  std::vector<std::optional<Score>> scores(n_jobs);
  std::vector<std::exception_ptr> errors(n_jobs);
  auto run_job = [&](std::size_t job) {
    const std::size_t r = job / (n_fs * n_models);
    const std::size_t f = (job / n_models) % n_fs;
    const ModelKind kind = config.models[job % n_models];
    if (!is_supported(kind)) return;
    try {
      const auto& p = prepared[r * n_fs + f];
      const TrainedModel m = fit(kind, p.train, config.model_config, config.seed + r);
      scores[job] = Score{score(config.flavor, m, p.test), score(config.flavor, m, p.train)};
    } catch (...) {
      errors[job] = std::current_exception();
    }
  };

  const unsigned jobs = std::clamp<unsigned>(config.jobs, 1, static_cast<unsigned>(n_jobs));
  if (jobs == 1) {
    for (std::size_t j = 0; j < n_jobs; ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < n_jobs; j = next++) run_job(j);
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t f = 0; f < n_fs; ++f) {
    for (std::size_t mi = 0; mi < n_models; ++mi) {
      CellResult cell;
      cell.feature_set = config.feature_sets[f];
      cell.model = config.models[mi];
      cell.supported = is_supported(cell.model);
      if (cell.supported) {
        for (std::size_t r = 0; r < config.repeats; ++r) {
          const auto& s = *scores[(r * n_fs + f) * n_models + mi];
          cell.test_accuracy.push_back(s.test);
          cell.train_accuracy.push_back(s.train);
        }
        const double n = static_cast<double>(config.repeats);
        cell.mean_test = std::accumulate(cell.test_accuracy.begin(), cell.test_accuracy.end(), 0.0) / n;
        cell.mean_train = std::accumulate(cell.train_accuracy.begin(), cell.train_accuracy.end(), 0.0) / n;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

EvalReport run_ablation(std::span<const SessionRecording> corpus, const AblationConfig& config) {
  return run_ablation(build_dataset(corpus, config.flavor, config.jobs), config);
}

std::string write_report_csv(const EvalReport& report) {
  std::string out = fmt::format("# flavor={} repeats={} seed={}\n", to_string(report.flavor),
                                report.repeats, report.seed);
  out += "feature_set,model,supported,mean_test_accuracy,mean_train_accuracy,test_accuracy_by_repeat\n";
  for (const auto& c : report.cells) {
    out += fmt::format("\"{}\",{},{},", c.feature_set.name(), to_string(c.model), c.supported ? 1 : 0);
    if (c.supported) {
      out += fmt::format("{},{},{}", c.mean_test, c.mean_train, fmt::join(c.test_accuracy, ";"));
    } else {
      out += ",,";
    }
    out += '\n';
  }
  return out;
}

std::string write_report_table(const EvalReport& report) {
  std::size_t first = std::string_view("INPUT FEATURES").size();
  for (const auto& fs : report.feature_sets) first = std::max(first, fs.name().size());
  std::vector<std::size_t> widths;
  for (auto m : report.models) widths.push_back(std::max<std::size_t>(display_name(m).size(), 7));

  std::string out = fmt::format("Binary classification results ({} dataset, {} repeats, seed {})\n",
                                to_string(report.flavor), report.repeats, report.seed);
  out += fmt::format("{:<{}}", "INPUT FEATURES", first);
  for (std::size_t m = 0; m < report.models.size(); ++m) {
    out += fmt::format(" | {:>{}}", display_name(report.models[m]), widths[m]);
  }
  out += '\n';
  out += std::string(out.size() - out.rfind('\n', out.size() - 2) - 2, '-');
  out += '\n';
  for (std::size_t f = 0; f < report.feature_sets.size(); ++f) {
    out += fmt::format("{:<{}}", report.feature_sets[f].name(), first);
    for (std::size_t m = 0; m < report.models.size(); ++m) {
      const auto& c = report.cell(f, m);
      const std::string v = c.supported ? fmt::format("{:.3f}", c.mean_test) : "n/a";
      out += fmt::format(" | {:>{}}", v, widths[m]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> GroupSummary::ranking(const std::string& dimension,
                                               const std::string& measure) const {
  std::vector<const GroupMeans*> sel;
  for (const auto& r : rows) {
    if (r.dimension == dimension) sel.push_back(&r);
  }
  auto value = [&](const GroupMeans* g) {
    if (measure == "hr") return g->mean_hr;
    if (measure == "acc") return g->mean_acc;
    if (measure == "gyro") return g->mean_gyro;
    throw SpecError("unknown measure \"" + measure + "\"");
  };
  std::stable_sort(sel.begin(), sel.end(),
                   [&](const GroupMeans* a, const GroupMeans* b) { return value(a) > value(b); });
  std::vector<std::string> out;
  for (auto* g : sel) out.push_back(g->category);
  return out;
}

GroupSummary group_summary(std::span<const SessionRecording> corpus) {
  if (corpus.empty()) throw DomainError("group summary of an empty corpus");
  struct Acc {
    std::size_t sessions = 0, samples = 0, hr_n = 0;
    double hr = 0, acc = 0, gyro = 0;
  };
  // Ordered maps keep the output stable.
  std::map<std::pair<int, std::string>, Acc> sums;
  auto norm = [](const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); };

  for (const auto& raw : corpus) {
    const auto cleaned = clean_recording(raw).first;
    std::vector<std::pair<int, std::string>> keys = {
        {0, std::string(to_string(cleaned.meta.age_group()))},
        {1, std::string(to_string(cleaned.meta.gender))}};
    if (cleaned.assessment) {
      keys.emplace_back(2, std::string(to_string(cleaned.assessment->emotion)));
      keys.emplace_back(3, std::string(to_string(map_emotion(cleaned.assessment->emotion))));
    }
    for (const auto& key : keys) {
      auto& a = sums[key];
      ++a.sessions;
      for (const auto& s : cleaned.samples) {
        ++a.samples;
        if (s.hr_bpm) {
          a.hr += *s.hr_bpm;
          ++a.hr_n;
        }
        a.acc += norm(s.acc);
        a.gyro += norm(s.gyro);
      }
    }
  }

  static constexpr std::array<const char*, 4> kDims = {"age_group", "gender", "emotion", "mood"};
  GroupSummary out;
  for (const auto& [key, a] : sums) {
    GroupMeans g;
    g.dimension = kDims[static_cast<std::size_t>(key.first)];
    g.category = key.second;
    g.sessions = a.sessions;
    g.samples = a.samples;
    g.mean_hr = a.hr_n ? a.hr / static_cast<double>(a.hr_n) : 0.0;
    g.mean_acc = a.acc / static_cast<double>(a.samples);
    g.mean_gyro = a.gyro / static_cast<double>(a.samples);
    out.rows.push_back(std::move(g));
  }
  return out;
}

std::string write_summary_csv(const GroupSummary& s) {
  std::string out = "dimension,category,sessions,samples,mean_hr,mean_acc,mean_gyro\n";
  for (const auto& r : s.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.dimension, r.category, r.sessions, r.samples,
                       r.mean_hr, r.mean_acc, r.mean_gyro);
  }
  return out;
}

std::string write_summary_text(const GroupSummary& s) {
  std::string out;
  std::string current;
  for (const auto& r : s.rows) {
    if (r.dimension != current) {
      current = r.dimension;
      out += fmt::format("\n{:<14} {:>8} {:>9} {:>10} {:>10} {:>10}\n", current, "sessions", "samples",
                         "mean_hr", "mean_|acc|", "mean_|gyr|");
    }
    out += fmt::format("{:<14} {:>8} {:>9} {:>10.3f} {:>10.4f} {:>10.4f}\n", r.category, r.sessions,
                       r.samples, r.mean_hr, r.mean_acc, r.mean_gyro);
  }
  out += "\nRankings (highest first)\n";
  for (const char* dim : {"age_group", "gender", "emotion", "mood"}) {
    for (const char* m : {"hr", "acc", "gyro"}) {
      auto rank = s.ranking(dim, m);
      if (rank.empty()) continue;
      out += fmt::format("  {:<10} by {:<5}: {}\n", dim, m, fmt::join(rank, " > "));
    }
  }
  return out;
}

SessionPrediction predict_session(const TrainedModel& model, const SessionRecording& recording,
                                  DatasetFlavor path) {
  SessionRecording cleaned;
  try {
    cleaned = clean_recording(recording).first;
  } catch (const EmptySessionError& e) {
    throw InsufficientDataError(std::string("insufficient data: ") + e.what());
  }
  std::size_t hr_readings = 0;
  for (const auto& s : cleaned.samples) hr_readings += s.hr_bpm.has_value();
  if (hr_readings < 2) throw InsufficientDataError("insufficient data: fewer than two heart rate readings");

  SessionPrediction out;
  out.features_used = model.feature_columns;
  if (path == DatasetFlavor::statistical) {
    const auto row = statistical_features(cleaned);
    const auto x = gather_model_inputs(model, statistical_column_names(), row);
    out.probability = predict_proba(model, x);
    out.mood = predict(model, x);
    return out;
  }
  const FeatureMatrix rows = build_nonstatistical_rows(cleaned);
  std::vector<BinaryMood> votes;
  double sum = 0.0;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto x = gather_model_inputs(model, rows.column_names(), rows.row(r));
    sum += predict_proba(model, x);
    votes.push_back(predict(model, x));
  }
  out.rows = rows.rows();
  out.probability = sum / static_cast<double>(rows.rows());
  out.mood = majority_vote(votes);
  return out;
}

}  // namespace emowatch
