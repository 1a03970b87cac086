#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "emowatch/errors.hpp"
#include "emowatch/models.hpp"
#include "model_detail.hpp"

namespace emowatch {

double DecisionTree::predict_proba(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].pleasant_fraction;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  // Children are always appended after their parent.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

double gini(double pleasant, double n) {
  if (n <= 0) return 0.0;
  const double p = pleasant / n;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& x, const TreeConfig& c, Rng* feature_rng)
      : x_(x), config_(c), rng_(feature_rng) {
    if (rng_) {
      subsample_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));
    }
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> all(x_.cols());
    std::iota(all.begin(), all.end(), 0);
    if (!rng_ || subsample_ >= all.size()) return all;
    // Partial Fisher-Yates, then sorted so ties still prefer the lowest index.
    for (std::size_t i = 0; i < subsample_; ++i) {
      const std::size_t j = i + uniform_index(*rng_, all.size() - i);
      std::swap(all[i], all[j]);
    }
    all.resize(subsample_);
    std::sort(all.begin(), all.end());
    return all;
  }

  Split best_split(const std::vector<std::size_t>& rows) {
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    const double n = static_cast<double>(rows.size());
    std::vector<std::pair<double, bool>> col(rows.size());
    double total_pleasant = 0;
    for (std::size_t r : rows) total_pleasant += x_.labels()[r] == BinaryMood::pleasant;

    for (std::size_t f : candidate_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        col[i] = {x_.at(rows[i], f), x_.labels()[rows[i]] == BinaryMood::pleasant};
      }
      std::sort(col.begin(), col.end());
      double left_pleasant = 0;
      for (std::size_t i = 0; i + 1 < col.size(); ++i) {
        left_pleasant += col[i].second;
        const double a = col[i].first;
        const double b = col[i + 1].first;
        if (a == b) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double impurity =
            (nl * gini(left_pleasant, nl) + nr * gini(total_pleasant - left_pleasant, nr)) / n;
        if (impurity < best.impurity) {
          double thr = a + (b - a) / 2.0;
          if (!(thr < b)) thr = a;
          best = {static_cast<int>(f), thr, impurity};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double pleasant = 0;
    for (std::size_t r : rows) pleasant += x_.labels()[r] == BinaryMood::pleasant;
    const double n = static_cast<double>(rows.size());
    tree_.nodes[id].pleasant_fraction = pleasant / n;
    tree_.nodes[id].samples = rows.size();

    const bool pure = pleasant == 0 || pleasant == n;
    const bool depth_cap = config_.max_depth > 0 && depth >= config_.max_depth;
    if (pure || depth_cap || rows.size() < std::max<std::size_t>(config_.min_samples_split, 2)) {
      return id;
    }
    const Split s = best_split(rows);
    if (s.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_.at(r, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const FeatureMatrix& x_;
  TreeConfig config_;
  Rng* rng_;
  std::size_t subsample_ = 0;
  DecisionTree tree_;
};

}  // namespace

DecisionTree fit_decision_tree(const FeatureMatrix& normalized, const TreeConfig& config,
                               Rng* feature_rng, std::span<const std::size_t> rows) {
  if (normalized.rows() == 0) throw DegenerateLabelError("cannot fit a tree on zero rows");
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  if (idx.empty()) {
    idx.resize(normalized.rows());
    std::iota(idx.begin(), idx.end(), 0);
  }
  return TreeBuilder(normalized, config, feature_rng).build(std::move(idx));
}

namespace detail {

ForestParams fit_forest(const FeatureMatrix& x, const ForestConfig& c, std::uint64_t seed,
                        unsigned jobs) {
  if (c.trees == 0) throw SpecError("random forest needs at least one tree");
  ForestParams f;
  f.trees.resize(c.trees);

  auto grow_tree = [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(x.rows());
    if (c.bootstrap) {
      for (auto& r : rows) r = uniform_index(rng, x.rows());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    f.trees[t] = fit_decision_tree(x, c.tree, c.feature_subsample ? &rng : nullptr, rows);
  };

  jobs = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(c.trees));
  if (jobs == 1) {
    for (std::size_t t = 0; t < c.trees; ++t) grow_tree(t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < c.trees; t += jobs) grow_tree(t);
      });
    }
  }
  return f;
}

}  // namespace detail

}  // namespace emowatch
