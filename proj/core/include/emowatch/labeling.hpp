#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emowatch/types.hpp"

namespace emowatch {

using Point2 = std::array<double, 2>;

struct KMeansOptions {
  double tolerance = 1e-6;  // stop once no centroid moves further than this
  int max_iterations = 300;
};

struct ClusterModel {
  std::vector<Point2> centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  // Inertia after each assignment step, one entry per Lloyd iteration.
  std::vector<double> inertia_history;
  int iterations = 0;

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

// Lloyd's algorithm with k-means++ seeding. Deterministic given `seed`.
// Throws DegenerateInputError when there are fewer than k distinct points.
ClusterModel kmeans(std::span<const Point2> points, std::size_t k, std::uint64_t seed,
                    KMeansOptions options = {});

// Best matching fraction over the two cluster-to-mood bijections; k must be 2.
double cluster_label_agreement(const ClusterModel& model, std::span<const BinaryMood> moods);

struct VAPoint {
  std::string session_id;
  int valence = 0;
  int arousal = 0;
  BinaryMood mood = BinaryMood::pleasant;
};

// Self-assessed (valence, arousal) of every assessed session.
std::vector<VAPoint> valence_arousal_points(std::span<const SessionRecording> corpus);

// session_id,valence,arousal,mood,cluster
std::string write_cluster_csv(std::span<const VAPoint> points, const ClusterModel& model);

}  // namespace emowatch
