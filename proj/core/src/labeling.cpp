#include "emowatch/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "emowatch/errors.hpp"
#include "emowatch/random.hpp"

namespace emowatch {

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

// Nearest centroid, ties to the lowest index.
std::size_t nearest(const Point2& p, const std::vector<Point2>& centroids, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_dist(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

std::vector<Point2> seed_plus_plus(std::span<const Point2> points, std::size_t k, Rng& rng) {
  std::vector<Point2> centroids;
  centroids.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d;
      nearest(points[i], centroids, &d);
      d2[i] = d;
      total += d;
    }
    // Fewer than k distinct points was ruled out, so total > 0.
    double target = uniform01(rng) * total;
    std::size_t pick = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      if (target < d2[i]) {
        pick = i;
        break;
      }
      target -= d2[i];
    }
    while (d2[pick] <= 0.0) --pick;
    centroids.push_back(points[pick]);
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                    KMeansOptions options) {
  if (k == 0) throw SpecError("k-means needs k >= 1");
  std::set<Point2> distinct(points.begin(), points.end());
  if (distinct.size() < k) {
    throw DegenerateInputError(
        fmt::format("k-means with k={} needs at least {} distinct points, got {}", k, k, distinct.size()));
  }

  Rng rng(seed);
  ClusterModel model;
  model.centroids = seed_plus_plus(points, k, rng);
  model.assignments.assign(points.size(), 0);

  std::vector<Point2> sums(k);
  std::vector<std::size_t> counts(k);
  std::vector<double> dist(points.size());
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      model.assignments[i] = nearest(points[i], model.centroids, &dist[i]);
      inertia += dist[i];
    }
    model.inertia_history.push_back(inertia);
    model.iterations = iter + 1;

    std::fill(sums.begin(), sums.end(), Point2{0.0, 0.0});
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto c = model.assignments[i];
      sums[c][0] += points[i][0];
      sums[c][1] += points[i][1];
      ++counts[c];
    }

    double max_move = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      Point2 next;
      if (counts[c] == 0) {
        // Reseed at the point farthest from its own centroid.
        auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        next = points[far];
        dist[far] = 0.0;
      } else {
        next = {sums[c][0] / static_cast<double>(counts[c]), sums[c][1] / static_cast<double>(counts[c])};
      }
      max_move = std::max(max_move, std::sqrt(sq_dist(next, model.centroids[c])));
      model.centroids[c] = next;
    }
    if (max_move < options.tolerance) break;
  }

  // Final assignment against the final centroids so that the stored
  // assignments are a fixed point of the nearest-centroid rule.
  model.inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d;
    model.assignments[i] = nearest(points[i], model.centroids, &d);
    model.inertia += d;
  }
  return model;
}

double cluster_label_agreement(const ClusterModel& model, std::span<const BinaryMood> moods) {
  if (model.centroids.size() != 2) {
    throw SpecError(fmt::format("label agreement needs k = 2, got k = {}", model.centroids.size()));
  }
  if (moods.size() != model.assignments.size()) {
    throw ShapeError("mood count does not match assignment count");
  }
  if (moods.empty()) return 1.0;
  std::size_t match = 0;  // cluster 0 <-> pleasant
  for (std::size_t i = 0; i < moods.size(); ++i) {
    const bool pleasant = moods[i] == BinaryMood::pleasant;
    if ((model.assignments[i] == 0) == pleasant) ++match;
  }
  const double n = static_cast<double>(moods.size());
  return std::max(match, moods.size() - match) / n;
}

std::vector<VAPoint> valence_arousal_points(std::span<const SessionRecording> corpus) {
  std::vector<VAPoint> out;
  for (const auto& r : corpus) {
    if (!r.assessment) continue;
    out.push_back({r.meta.session_id, r.assessment->valence, r.assessment->arousal,
                   map_emotion(r.assessment->emotion)});
  }
  return out;
}

std::string write_cluster_csv(std::span<const VAPoint> points, const ClusterModel& model) {
  if (points.size() != model.assignments.size()) throw ShapeError("point count does not match model");
  std::string out = "session_id,valence,arousal,mood,cluster\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out += fmt::format("{},{},{},{},{}\n", points[i].session_id, points[i].valence, points[i].arousal,
                       to_string(points[i].mood), model.assignments[i]);
  }
  return out;
}

}  // namespace emowatch
