#include "emowatch/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "model_detail.hpp"

namespace emowatch {

bool is_supported(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::logreg:
    case ModelKind::dtree:
    case ModelKind::rforest:
    case ModelKind::gnb:
    case ModelKind::knn:
    case ModelKind::mlp:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::dtree: return "dtree";
    case ModelKind::rforest: return "rforest";
    case ModelKind::gnb: return "gnb";
    case ModelKind::knn: return "knn";
    case ModelKind::mlp: return "mlp";
    case ModelKind::svm: return "svm";
    case ModelKind::adaboost: return "adaboost";
    case ModelKind::gradient_boost: return "gboost";
    case ModelKind::xgboost: return "xgb";
  }
  return "?";
}

std::string_view display_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::logreg: return "Logistic Regression";
    case ModelKind::dtree: return "Decision Tree";
    case ModelKind::rforest: return "Random Forest";
    case ModelKind::gnb: return "Gaussian NB";
    case ModelKind::knn: return "KNN";
    case ModelKind::mlp: return "MLP";
    case ModelKind::svm: return "SVM";
    case ModelKind::adaboost: return "AdaBoost";
    case ModelKind::gradient_boost: return "Gradient Boost";
    case ModelKind::xgboost: return "XGB";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) noexcept {
  for (auto k : {ModelKind::logreg, ModelKind::dtree, ModelKind::rforest, ModelKind::gnb,
                 ModelKind::knn, ModelKind::mlp, ModelKind::svm, ModelKind::adaboost,
                 ModelKind::gradient_boost, ModelKind::xgboost}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

Normalizer Normalizer::fit(const FeatureMatrix& m) {
  Normalizer n;
  const std::size_t d = m.cols();
  n.mean.assign(d, 0.0);
  n.std.assign(d, 0.0);
  const double rows = static_cast<double>(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) n.mean[c] += m.at(r, c);
  }
  for (auto& v : n.mean) v /= rows;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double z = m.at(r, c) - n.mean[c];
      n.std[c] += z * z;
    }
  }
  for (auto& v : n.std) v = std::sqrt(v / rows);
  return n;
}

void Normalizer::transform(std::span<double> row) const {
  for (std::size_t c = 0; c < row.size(); ++c) {
    row[c] = std[c] > 0.0 ? (row[c] - mean[c]) / std[c] : 0.0;
  }
}

std::vector<double> Normalizer::transform(std::span<const double> row) const {
  std::vector<double> out(row.begin(), row.end());
  transform(std::span<double>(out));
  return out;
}

FeatureMatrix Normalizer::transform(const FeatureMatrix& m) const {
  FeatureMatrix out(m.column_names());
  std::vector<double> buf(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    std::copy(row.begin(), row.end(), buf.begin());
    transform(std::span<double>(buf));
    out.append_row(buf, m.labels()[r], m.group_ids()[r]);
  }
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double target(BinaryMood m) { return m == BinaryMood::pleasant ? 1.0 : 0.0; }

void check_trainable(const FeatureMatrix& x) {
  const auto pleasant = std::count(x.labels().begin(), x.labels().end(), BinaryMood::pleasant);
  if (x.rows() < 2 || pleasant == 0 || static_cast<std::size_t>(pleasant) == x.rows()) {
    throw DegenerateLabelError(
        fmt::format("training needs both classes present ({} rows, {} pleasant)", x.rows(), pleasant));
  }
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw DomainError("non-finite feature value in training data");
  }
}

LogRegParams fit_logreg(const FeatureMatrix& x, const LogRegConfig& c) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  LogRegParams p;
  p.weights.assign(d, 0.0);
  std::vector<double> gw(d);
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      auto row = x.row(r);
      const double z = std::inner_product(row.begin(), row.end(), p.weights.begin(), p.bias);
      const double err = sigmoid(z) - target(x.labels()[r]);
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * row[j];
      gb += err;
    }
    for (std::size_t j = 0; j < d; ++j) {
      p.weights[j] -= c.learning_rate * (gw[j] / static_cast<double>(n) + c.l2 * p.weights[j]);
    }
    p.bias -= c.learning_rate * gb / static_cast<double>(n);
  }
  return p;
}

GnbParams fit_gnb(const FeatureMatrix& x, const GnbConfig& c) {
  const std::size_t d = x.cols();
  GnbParams p;
  p.mean_pleasant.assign(d, 0.0);
  p.mean_unpleasant.assign(d, 0.0);
  p.var_pleasant.assign(d, 0.0);
  p.var_unpleasant.assign(d, 0.0);
  double np = 0, nu = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const bool pl = x.labels()[r] == BinaryMood::pleasant;
    auto& mean = pl ? p.mean_pleasant : p.mean_unpleasant;
    (pl ? np : nu) += 1;
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(r, j);
  }
  for (std::size_t j = 0; j < d; ++j) {
    p.mean_pleasant[j] /= np;
    p.mean_unpleasant[j] /= nu;
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const bool pl = x.labels()[r] == BinaryMood::pleasant;
    const auto& mean = pl ? p.mean_pleasant : p.mean_unpleasant;
    auto& var = pl ? p.var_pleasant : p.var_unpleasant;
    for (std::size_t j = 0; j < d; ++j) {
      const double z = x.at(r, j) - mean[j];
      var[j] += z * z;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    p.var_pleasant[j] = std::max(p.var_pleasant[j] / np, c.var_floor);
    p.var_unpleasant[j] = std::max(p.var_unpleasant[j] / nu, c.var_floor);
  }
  p.prior_pleasant = np / (np + nu);
  return p;
}

double gnb_log_joint(std::span<const double> x, double prior, const std::vector<double>& mean,
                     const std::vector<double>& var) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double lp = std::log(prior);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = x[j] - mean[j];
    lp -= 0.5 * (kLog2Pi + std::log(var[j]) + z * z / var[j]);
  }
  return lp;
}

double gnb_proba(const GnbParams& p, std::span<const double> x) {
  const double lp = gnb_log_joint(x, p.prior_pleasant, p.mean_pleasant, p.var_pleasant);
  const double lu = gnb_log_joint(x, 1.0 - p.prior_pleasant, p.mean_unpleasant, p.var_unpleasant);
  if (lp == lu) return 0.5;
  return sigmoid(lp - lu);
}

KnnParams fit_knn(const FeatureMatrix& x, const KnnConfig& c) {
  if (c.k == 0) throw SpecError("KNN needs k >= 1");
  return {c.k, x.cols(), x.values(), x.labels()};
}

double knn_proba(const KnnParams& p, std::span<const double> x) {
  const std::size_t n = p.labels.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double z = p.rows[r * p.cols + j] - x[j];
      s += z * z;
    }
    dist[r] = {s, r};
  }
  const std::size_t k = std::min(p.k, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::size_t pleasant = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (p.labels[dist[i].second] == BinaryMood::pleasant) ++pleasant;
  }
  return static_cast<double>(pleasant) / static_cast<double>(k);
}

double forest_proba(const ForestParams& f, std::span<const double> x) {
  std::size_t votes = 0;
  for (const auto& t : f.trees) {
    if (t.predict_proba(x) >= 0.5) ++votes;
  }
  return static_cast<double>(votes) / static_cast<double>(f.trees.size());
}

}  // namespace

TrainedModel fit(ModelKind kind, const FeatureMatrix& x, const ModelConfig& config,
                 std::uint64_t seed, FitOptions options) {
  if (!is_supported(kind)) {
    throw UnsupportedModelError(fmt::format("model kind {} is not implemented", to_string(kind)));
  }
  if (kind == ModelKind::mlp) return fit_mlp(x, config, seed);
  check_trainable(x);

  TrainedModel m;
  m.kind = kind;
  m.config = config;
  m.seed = seed;
  m.feature_columns = x.column_names();
  m.normalizer = Normalizer::fit(x);
  const FeatureMatrix z = m.normalizer.transform(x);

  switch (kind) {
    case ModelKind::logreg: m.params = fit_logreg(z, config.logreg); break;
    case ModelKind::gnb: m.params = fit_gnb(z, config.gnb); break;
    case ModelKind::knn: m.params = fit_knn(z, config.knn); break;
    case ModelKind::dtree: m.params = fit_decision_tree(z, config.dtree); break;
    case ModelKind::rforest: m.params = detail::fit_forest(z, config.rforest, seed, options.jobs); break;
    default: break;
  }
  return m;
}

TrainedModel train_model(ModelKind kind, const FeatureMatrix& data, const FeatureSetSpec& spec,
                         const ModelConfig& config, std::uint64_t seed, FitOptions options,
                         DatasetFlavor flavor) {
  FeatureMatrix selected = select_features(data, spec);
  std::optional<PcaModel> pca;
  FeatureMatrix input = selected;
  if (spec.pca_components) {
    pca = fit_pca(selected, *spec.pca_components);
    input = apply_pca(*pca, selected);
  }
  TrainedModel m = fit(kind, input, config, seed, options);
  m.flavor = flavor;
  m.feature_set = spec.name();
  m.feature_columns = selected.column_names();
  m.pca = std::move(pca);
  return m;
}

double predict_proba(const TrainedModel& m, std::span<const double> x) {
  if (x.size() != m.input_width()) {
    throw ShapeError(fmt::format("model expects {} features, got {}", m.input_width(), x.size()));
  }
  std::vector<double> z = m.pca ? apply_pca(*m.pca, x) : std::vector<double>(x.begin(), x.end());
  m.normalizer.transform(std::span<double>(z));

  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogRegParams>) {
          return sigmoid(std::inner_product(z.begin(), z.end(), p.weights.begin(), p.bias));
        } else if constexpr (std::is_same_v<P, GnbParams>) {
          return gnb_proba(p, z);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          return knn_proba(p, z);
        } else if constexpr (std::is_same_v<P, DecisionTree>) {
          return p.predict_proba(z);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          return forest_proba(p, z);
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          return mlp::forward(p, z);
        } else {
          throw UnsupportedModelError("model has no parameters");
        }
      },
      m.params);
}

BinaryMood predict(const TrainedModel& m, std::span<const double> x) {
  const double p = predict_proba(m, x);
  if (p == 0.5 && (m.kind == ModelKind::knn || m.kind == ModelKind::gnb)) {
    return BinaryMood::unpleasant;
  }
  return p >= 0.5 ? BinaryMood::pleasant : BinaryMood::unpleasant;
}

std::vector<double> gather_model_inputs(const TrainedModel& m, const std::vector<std::string>& columns,
                                        std::span<const double> row) {
  if (row.size() != columns.size()) throw ShapeError("row width does not match column names");
  std::vector<double> out;
  out.reserve(m.feature_columns.size());
  for (const auto& name : m.feature_columns) {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ShapeError("input lacks model column \"" + name + "\"");
    out.push_back(row[static_cast<std::size_t>(it - columns.begin())]);
  }
  return out;
}

}  // namespace emowatch
