#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "emowatch/models.hpp"

namespace emowatch {

namespace mlp {

namespace {

struct Layout {
  std::size_t d, h1, h2;
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return h1 * d; }
  std::size_t w2() const { return b1() + h1; }
  std::size_t b2() const { return w2() + h2 * h1; }
  std::size_t w3() const { return b2() + h2; }
  std::size_t b3() const { return w3() + h2; }
  std::size_t total() const { return b3() + 1; }
};

Layout layout_of(const MlpParams& p) { return {p.inputs, p.hidden1, p.hidden2}; }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

std::size_t parameter_count(std::size_t inputs, const MlpConfig& c) noexcept {
  return Layout{inputs, c.hidden1, c.hidden2}.total();
}

MlpParams init_params(std::size_t inputs, const MlpConfig& c, Rng& rng) {
  MlpParams p{inputs, c.hidden1, c.hidden2, {}};
  const Layout l = layout_of(p);
  p.weights.assign(l.total(), 0.0);
  // He-uniform: U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)); biases start at 0.
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) p.weights[offset + i] = (2.0 * uniform01(rng) - 1.0) * limit;
  };
  fill(l.w1(), l.h1 * l.d, l.d);
  fill(l.w2(), l.h2 * l.h1, l.h1);
  fill(l.w3(), l.h2, l.h2);
  return p;
}

double forward(const MlpParams& p, std::span<const double> x) {
  const Layout l = layout_of(p);
  const double* w = p.weights.data();
  std::vector<double> a1(l.h1), a2(l.h2);
  for (std::size_t i = 0; i < l.h1; ++i) {
    double z = w[l.b1() + i];
    for (std::size_t j = 0; j < l.d; ++j) z += w[l.w1() + i * l.d + j] * x[j];
    a1[i] = std::max(0.0, z);
  }
  for (std::size_t i = 0; i < l.h2; ++i) {
    double z = w[l.b2() + i];
    for (std::size_t j = 0; j < l.h1; ++j) z += w[l.w2() + i * l.h1 + j] * a1[j];
    a2[i] = std::max(0.0, z);
  }
  double z = w[l.b3()];
  for (std::size_t j = 0; j < l.h2; ++j) z += w[l.w3() + j] * a2[j];
  return sigmoid(z);
}

double loss_and_gradient(const MlpParams& p, std::span<const double> x, std::span<const double> y,
                         std::vector<double>* grad, double dropout_rate, Rng* dropout_rng) {
  const Layout l = layout_of(p);
  const std::size_t n = y.size();
  if (x.size() != n * l.d) throw ShapeError("MLP batch width mismatch");
  const double* w = p.weights.data();
  if (grad) grad->assign(l.total(), 0.0);

  const bool drop = dropout_rng != nullptr && dropout_rate > 0.0;
  const double keep = 1.0 - dropout_rate;
  std::vector<double> z1(l.h1), a1(l.h1), mask(l.h1, 1.0), z2(l.h2), a2(l.h2), d2(l.h2), d1(l.h1);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * l.d;
    for (std::size_t i = 0; i < l.h1; ++i) {
      double z = w[l.b1() + i];
      for (std::size_t j = 0; j < l.d; ++j) z += w[l.w1() + i * l.d + j] * xr[j];
      z1[i] = z;
      if (drop) mask[i] = uniform01(*dropout_rng) < keep ? 1.0 / keep : 0.0;
      a1[i] = std::max(0.0, z) * mask[i];
    }
    for (std::size_t i = 0; i < l.h2; ++i) {
      double z = w[l.b2() + i];
      for (std::size_t j = 0; j < l.h1; ++j) z += w[l.w2() + i * l.h1 + j] * a1[j];
      z2[i] = z;
      a2[i] = std::max(0.0, z);
    }
    double z3 = w[l.b3()];
    for (std::size_t j = 0; j < l.h2; ++j) z3 += w[l.w3() + j] * a2[j];

    // Binary cross-entropy from the logit: softplus(z) - y z.
    loss += softplus(z3) - y[r] * z3;
    if (!grad) continue;

    auto& g = *grad;
    const double dz3 = (sigmoid(z3) - y[r]) * inv_n;
    for (std::size_t j = 0; j < l.h2; ++j) {
      g[l.w3() + j] += dz3 * a2[j];
      d2[j] = z2[j] > 0.0 ? dz3 * w[l.w3() + j] : 0.0;
    }
    g[l.b3()] += dz3;

    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t i = 0; i < l.h2; ++i) {
      if (d2[i] == 0.0) continue;
      for (std::size_t j = 0; j < l.h1; ++j) {
        g[l.w2() + i * l.h1 + j] += d2[i] * a1[j];
        d1[j] += d2[i] * w[l.w2() + i * l.h1 + j];
      }
      g[l.b2() + i] += d2[i];
    }
    for (std::size_t i = 0; i < l.h1; ++i) {
      const double di = z1[i] > 0.0 ? d1[i] * mask[i] : 0.0;
      if (di == 0.0) continue;
      for (std::size_t j = 0; j < l.d; ++j) g[l.w1() + i * l.d + j] += di * xr[j];
      g[l.b1() + i] += di;
    }
  }
  return loss * inv_n;
}

}  // namespace mlp

namespace {

struct EpochMetrics {
  double loss;
  double accuracy;
};

EpochMetrics evaluate(const MlpParams& p, const FeatureMatrix& z) {
  std::vector<double> y(z.rows());
  std::size_t correct = 0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    y[r] = z.labels()[r] == BinaryMood::pleasant ? 1.0 : 0.0;
    const bool pleasant = mlp::forward(p, z.row(r)) >= 0.5;
    if (pleasant == (y[r] == 1.0)) ++correct;
  }
  const double loss = mlp::loss_and_gradient(p, z.values(), y, nullptr);
  return {loss, 100.0 * static_cast<double>(correct) / static_cast<double>(z.rows())};
}

}  // namespace

TrainedModel fit_mlp(const FeatureMatrix& x, const ModelConfig& config, std::uint64_t seed,
                     const FeatureMatrix* validation, TrainingCurve* curve) {
  const auto pleasant = std::count(x.labels().begin(), x.labels().end(), BinaryMood::pleasant);
  if (x.rows() < 2 || pleasant == 0 || static_cast<std::size_t>(pleasant) == x.rows()) {
    throw DegenerateLabelError("MLP training needs both classes present");
  }
  for (double v : x.values()) {
    if (!std::isfinite(v)) throw DomainError("non-finite feature value in training data");
  }
  const MlpConfig& c = config.mlp;
  if (c.hidden1 == 0 || c.hidden2 == 0) throw SpecError("MLP hidden layers must be non-empty");
  if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0) throw SpecError("dropout rate must be in [0, 1)");

  TrainedModel m;
  m.kind = ModelKind::mlp;
  m.config = config;
  m.seed = seed;
  m.feature_columns = x.column_names();
  m.normalizer = Normalizer::fit(x);
  const FeatureMatrix z = m.normalizer.transform(x);
  std::optional<FeatureMatrix> zval;
  if (validation) zval = m.normalizer.transform(*validation);

  Rng init_rng(derive_seed(seed, 0));
  Rng dropout_rng(derive_seed(seed, 1));
  Rng shuffle_rng(derive_seed(seed, 2));
  MlpParams p = mlp::init_params(x.cols(), c, init_rng);

  const std::size_t n = z.rows();
  const std::size_t batch = c.batch_size == 0 ? n : std::min(c.batch_size, n);
  std::vector<double> y(n);
  for (std::size_t r = 0; r < n; ++r) y[r] = z.labels()[r] == BinaryMood::pleasant ? 1.0 : 0.0;

  std::vector<double> m1(p.weights.size(), 0.0), m2(p.weights.size(), 0.0), grad;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> bx, by;
  long step = 0;
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        auto row = z.row(order[i]);
        bx.insert(bx.end(), row.begin(), row.end());
        by.push_back(y[order[i]]);
      }
      mlp::loss_and_gradient(p, bx, by, &grad, c.dropout_rate, &dropout_rng);
      ++step;
      const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < p.weights.size(); ++i) {
        m1[i] = c.beta1 * m1[i] + (1.0 - c.beta1) * grad[i];
        m2[i] = c.beta2 * m2[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        p.weights[i] -= c.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + c.epsilon);
      }
    }
    if (curve) {
      auto tr = evaluate(p, z);
      curve->train_loss.push_back(tr.loss);
      curve->train_accuracy.push_back(tr.accuracy);
      if (zval && zval->rows() > 0) {
        auto te = evaluate(p, *zval);
        curve->test_loss.push_back(te.loss);
        curve->test_accuracy.push_back(te.accuracy);
      }
    }
  }
  m.params = std::move(p);
  return m;
}

}  // namespace emowatch
