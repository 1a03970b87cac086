#include <fstream>
#include <sstream>

#include <json.hpp>

#include "emowatch/errors.hpp"
#include "emowatch/models.hpp"

namespace emowatch {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "emowatch-model";
constexpr int kVersion = 1;

ordered_json config_json(const ModelConfig& c) {
  ordered_json j;
  j["logreg"] = {{"learning_rate", c.logreg.learning_rate},
                 {"epochs", c.logreg.epochs},
                 {"l2", c.logreg.l2}};
  j["gnb"] = {{"var_floor", c.gnb.var_floor}};
  j["knn"] = {{"k", c.knn.k}};
  j["dtree"] = {{"max_depth", c.dtree.max_depth}, {"min_samples_split", c.dtree.min_samples_split}};
  j["rforest"] = {{"trees", c.rforest.trees},
                  {"bootstrap", c.rforest.bootstrap},
                  {"feature_subsample", c.rforest.feature_subsample},
                  {"max_depth", c.rforest.tree.max_depth},
                  {"min_samples_split", c.rforest.tree.min_samples_split}};
  j["mlp"] = {{"hidden1", c.mlp.hidden1},   {"dropout_rate", c.mlp.dropout_rate},
              {"hidden2", c.mlp.hidden2},   {"epochs", c.mlp.epochs},
              {"learning_rate", c.mlp.learning_rate}, {"beta1", c.mlp.beta1},
              {"beta2", c.mlp.beta2},       {"epsilon", c.mlp.epsilon},
              {"batch_size", c.mlp.batch_size}};
  return j;
}

ModelConfig config_from(const ordered_json& j) {
  ModelConfig c;
  const auto& lr = j.at("logreg");
  c.logreg = {lr.at("learning_rate").get<double>(), lr.at("epochs").get<int>(), lr.at("l2").get<double>()};
  c.gnb.var_floor = j.at("gnb").at("var_floor").get<double>();
  c.knn.k = j.at("knn").at("k").get<std::size_t>();
  c.dtree = {j.at("dtree").at("max_depth").get<int>(), j.at("dtree").at("min_samples_split").get<std::size_t>()};
  const auto& rf = j.at("rforest");
  c.rforest.trees = rf.at("trees").get<std::size_t>();
  c.rforest.bootstrap = rf.at("bootstrap").get<bool>();
  c.rforest.feature_subsample = rf.at("feature_subsample").get<bool>();
  c.rforest.tree = {rf.at("max_depth").get<int>(), rf.at("min_samples_split").get<std::size_t>()};
  const auto& m = j.at("mlp");
  c.mlp.hidden1 = m.at("hidden1").get<std::size_t>();
  c.mlp.dropout_rate = m.at("dropout_rate").get<double>();
  c.mlp.hidden2 = m.at("hidden2").get<std::size_t>();
  c.mlp.epochs = m.at("epochs").get<int>();
  c.mlp.learning_rate = m.at("learning_rate").get<double>();
  c.mlp.beta1 = m.at("beta1").get<double>();
  c.mlp.beta2 = m.at("beta2").get<double>();
  c.mlp.epsilon = m.at("epsilon").get<double>();
  c.mlp.batch_size = m.at("batch_size").get<std::size_t>();
  return c;
}

// Nodes as [feature, threshold, left, right, pleasant_fraction, samples].
ordered_json tree_json(const DecisionTree& t) {
  ordered_json nodes = ordered_json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.pleasant_fraction, n.samples});
  }
  return nodes;
}

DecisionTree tree_from(const ordered_json& j) {
  DecisionTree t;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 6) throw FormatError("malformed tree node");
    t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(),
                       n[4].get<double>(), n[5].get<std::size_t>()});
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw FormatError("empty tree");
  for (int i = 0; i < count; ++i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.feature >= 0 && (n.left <= i || n.right <= i || n.left >= count || n.right >= count)) {
      throw FormatError("tree node references an invalid child");
    }
  }
  return t;
}

ordered_json params_json(const ModelParams& params) {
  return std::visit(
      [](const auto& p) -> ordered_json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LogRegParams>) {
          return {{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<P, GnbParams>) {
          return {{"prior_pleasant", p.prior_pleasant},
                  {"mean_pleasant", p.mean_pleasant},
                  {"var_pleasant", p.var_pleasant},
                  {"mean_unpleasant", p.mean_unpleasant},
                  {"var_unpleasant", p.var_unpleasant}};
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          std::vector<std::string> labels;
          for (auto l : p.labels) labels.emplace_back(to_string(l));
          return {{"k", p.k}, {"cols", p.cols}, {"rows", p.rows}, {"labels", labels}};
        } else if constexpr (std::is_same_v<P, DecisionTree>) {
          return {{"nodes", tree_json(p)}};
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          ordered_json trees = ordered_json::array();
          for (const auto& t : p.trees) trees.push_back(tree_json(t));
          return {{"trees", trees}};
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          return {{"inputs", p.inputs}, {"hidden1", p.hidden1}, {"hidden2", p.hidden2},
                  {"weights", p.weights}};
        } else {
          return ordered_json::object();
        }
      },
      params);
}

ModelParams params_from(ModelKind kind, const ordered_json& j, std::size_t width) {
  auto expect = [](bool ok, const char* what) {
    if (!ok) throw FormatError(std::string("inconsistent model parameters: ") + what);
  };
  switch (kind) {
    case ModelKind::logreg: {
      LogRegParams p{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
      expect(p.weights.size() == width, "weight count");
      return p;
    }
    case ModelKind::gnb: {
      GnbParams p{j.at("prior_pleasant").get<double>(),
                  j.at("mean_pleasant").get<std::vector<double>>(),
                  j.at("var_pleasant").get<std::vector<double>>(),
                  j.at("mean_unpleasant").get<std::vector<double>>(),
                  j.at("var_unpleasant").get<std::vector<double>>()};
      expect(p.mean_pleasant.size() == width && p.var_pleasant.size() == width &&
                 p.mean_unpleasant.size() == width && p.var_unpleasant.size() == width,
             "gaussian parameter count");
      return p;
    }
    case ModelKind::knn: {
      KnnParams p;
      p.k = j.at("k").get<std::size_t>();
      p.cols = j.at("cols").get<std::size_t>();
      p.rows = j.at("rows").get<std::vector<double>>();
      for (const auto& l : j.at("labels")) {
        auto mood = parse_mood(l.get<std::string>());
        expect(mood.has_value(), "label");
        p.labels.push_back(*mood);
      }
      expect(p.cols == width && p.rows.size() == p.cols * p.labels.size() && p.k > 0 &&
                 !p.labels.empty(),
             "neighbour table shape");
      return p;
    }
    case ModelKind::dtree: return tree_from(j.at("nodes"));
    case ModelKind::rforest: {
      ForestParams f;
      for (const auto& t : j.at("trees")) f.trees.push_back(tree_from(t));
      expect(!f.trees.empty(), "tree count");
      return f;
    }
    case ModelKind::mlp: {
      MlpParams p{j.at("inputs").get<std::size_t>(), j.at("hidden1").get<std::size_t>(),
                  j.at("hidden2").get<std::size_t>(), j.at("weights").get<std::vector<double>>()};
      MlpConfig shape;
      shape.hidden1 = p.hidden1;
      shape.hidden2 = p.hidden2;
      expect(p.inputs == width && p.weights.size() == mlp::parameter_count(p.inputs, shape),
             "weight count");
      return p;
    }
    default: throw FormatError("model kind has no parameters");
  }
}

ordered_json pca_json(const PcaModel& p) {
  return {{"mean", p.mean}, {"scale", p.scale}, {"components", p.components},
          {"eigenvalues", p.eigenvalues}};
}

PcaModel pca_from(const ordered_json& j) {
  PcaModel p;
  p.mean = j.at("mean").get<std::vector<double>>();
  p.scale = j.at("scale").get<std::vector<double>>();
  p.components = j.at("components").get<std::vector<std::vector<double>>>();
  p.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  if (p.scale.size() != p.mean.size() || p.components.empty()) throw FormatError("malformed PCA block");
  for (const auto& c : p.components) {
    if (c.size() != p.mean.size()) throw FormatError("malformed PCA component");
  }
  return p;
}

}  // namespace

std::string save_model(const TrainedModel& m) {
  ordered_json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["kind"] = std::string(to_string(m.kind));
  j["seed"] = m.seed;
  j["flavor"] = std::string(to_string(m.flavor));
  j["feature_set"] = m.feature_set;
  j["feature_columns"] = m.feature_columns;
  j["config"] = config_json(m.config);
  j["pca"] = m.pca ? pca_json(*m.pca) : ordered_json(nullptr);
  j["normalizer"] = {{"mean", m.normalizer.mean}, {"std", m.normalizer.std}};
  j["params"] = params_json(m.params);
  return j.dump(1) + "\n";
}

TrainedModel load_model(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kFormat) throw FormatError("not an emowatch model file");
    if (j.at("version").get<int>() != kVersion) {
      throw FormatError("unsupported model file version " + j.at("version").dump());
    }
    TrainedModel m;
    auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind || !is_supported(*kind)) throw FormatError("unsupported model kind " + j.at("kind").dump());
    m.kind = *kind;
    m.seed = j.at("seed").get<std::uint64_t>();
    auto flavor = parse_flavor(j.at("flavor").get<std::string>());
    if (!flavor) throw FormatError("unknown dataset flavor");
    m.flavor = *flavor;
    m.feature_set = j.at("feature_set").get<std::string>();
    m.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    m.config = config_from(j.at("config"));
    if (!j.at("pca").is_null()) m.pca = pca_from(j.at("pca"));
    m.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
    m.normalizer.std = j.at("normalizer").at("std").get<std::vector<double>>();

    const std::size_t width = m.pca ? m.pca->components.size() : m.feature_columns.size();
    if (m.pca && m.pca->mean.size() != m.feature_columns.size()) throw FormatError("PCA width mismatch");
    if (m.normalizer.mean.size() != width || m.normalizer.std.size() != width) {
      throw FormatError("normalizer width mismatch");
    }
    m.params = params_from(m.kind, j.at("params"), width);
    return m;
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

void save_model_file(const TrainedModel& m, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  out << save_model(m);
  if (!out.flush()) throw Error("write failed: " + file.string());
}

TrainedModel load_model_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str());
}

}  // namespace emowatch
