#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uavcov/channel.hpp"
#include "uavcov/random.hpp"

namespace uavcov {

/// UE-to-UAV association produced by K-means.
///
/// `members[j]` lists the UEs of cluster j in ascending UE index; that order
/// is the cluster-internal slot order used by power vectors and observations.
struct ClusterAssignment {
  std::vector<Point2> centroids;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> sizes;
  std::vector<std::vector<std::size_t>> members;
  double inertia = 0.0;

  std::size_t num_clusters() const { return centroids.size(); }

  /// Builds an assignment from labels, filling sizes/members/inertia.
  static ClusterAssignment from_labels(std::span<const Point2> positions,
                                       std::vector<Point2> centroids,
                                       std::vector<std::size_t> labels);
};

struct LloydResult {
  std::vector<std::size_t> labels;
  std::vector<Point2> centroids;
  double inertia = 0.0;  // measured against the incoming centroids
};

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  double tol = 1.0;  // centroid movement, metres; the harness uses 1e-4 L
};

/// One assignment + update pass. Ties go to the lower centroid index; a
/// centroid that attracts no points is left where it was.
LloydResult lloyd_step(std::span<const Point2> positions, std::span<const Point2> centroids);

/// Sum of squared distances to the assigned centroid.
double clustering_inertia(std::span<const Point2> positions, std::span<const Point2> centroids,
                          std::span<const std::size_t> labels);

/// k-means++ seeded Lloyd iterations, best of `restarts` by inertia. Every
/// returned cluster is non-empty.
ClusterAssignment kmeans(std::span<const Point2> positions, std::size_t k, RandomStream& rng,
                         const KMeansOptions& options = {});

}  // namespace uavcov
