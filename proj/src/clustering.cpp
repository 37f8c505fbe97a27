#include "uavcov/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace uavcov {

namespace {

double sq_dist(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::size_t nearest(Point2 p, std::span<const Point2> centroids, double* best_d2 = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = sq_dist(p, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  if (best_d2 != nullptr) *best_d2 = best_d;
  return best;
}

std::vector<Point2> cluster_means(std::span<const Point2> positions,
                                  std::span<const std::size_t> labels,
                                  std::span<const Point2> fallback) {
  const std::size_t k = fallback.size();
  std::vector<double> sx(k, 0.0), sy(k, 0.0);
  std::vector<std::size_t> n(k, 0);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    sx[labels[i]] += positions[i].x;
    sy[labels[i]] += positions[i].y;
    ++n[labels[i]];
  }
  std::vector<Point2> out(fallback.begin(), fallback.end());
  for (std::size_t j = 0; j < k; ++j) {
    if (n[j] > 0) {
      out[j] = {sx[j] / static_cast<double>(n[j]), sy[j] / static_cast<double>(n[j])};
    }
  }
  return out;
}

// Moves each empty cluster's centroid onto the point farthest from its own
// centroid (taken from clusters with more than one member).
void repair_empty(std::span<const Point2> positions, std::vector<Point2>& centroids,
                  std::vector<std::size_t>& labels) {
  const std::size_t k = centroids.size();
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t l : labels) ++counts[l];
  for (std::size_t e = 0; e < k; ++e) {
    if (counts[e] > 0) continue;
    std::size_t pick = positions.size();
    double far = -1.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      if (counts[labels[i]] < 2) continue;
      const double d = sq_dist(positions[i], centroids[labels[i]]);
      if (d > far) {
        far = d;
        pick = i;
      }
    }
    if (pick == positions.size()) {
      throw std::logic_error("k-means repair found no donor cluster");
    }
    --counts[labels[pick]];
    labels[pick] = e;
    counts[e] = 1;
    centroids[e] = positions[pick];
  }
}

std::vector<Point2> kmeanspp_seed(std::span<const Point2> positions, std::size_t k,
                                  RandomStream& rng) {
  std::vector<Point2> centroids;
  centroids.reserve(k);
  centroids.push_back(positions[rng.index(positions.size())]);
  std::vector<double> d2(positions.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      double best = 0.0;
      nearest(positions[i], centroids, &best);
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      centroids.push_back(positions[rng.index(positions.size())]);
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = positions.size() - 1;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(positions[pick]);
  }
  return centroids;
}

// Hartigan single-point moves: relocate a point whenever that lowers the total
// inertia, which Lloyd's batch reassignment can miss. Returns true if any
// point moved.
bool hartigan_refine(std::span<const Point2> positions, std::vector<Point2>& centroids,
                     std::vector<std::size_t>& labels, std::size_t max_passes) {
  const std::size_t k = centroids.size();
  std::vector<double> count(k, 0.0);
  for (std::size_t l : labels) count[l] += 1.0;
  bool any = false;
  for (std::size_t pass = 0; pass < max_passes; ++pass) {
    bool moved = false;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const std::size_t a = labels[i];
      if (count[a] < 2.0) continue;
      const double removal = count[a] / (count[a] - 1.0) * sq_dist(positions[i], centroids[a]);
      std::size_t best = a;
      double best_gain = 0.0;
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double gain = removal - count[b] / (count[b] + 1.0) * sq_dist(positions[i], centroids[b]);
        if (gain > best_gain * (1.0 + 1e-12) + 1e-12 * removal) {
          best_gain = gain;
          best = b;
        }
      }
      if (best == a) continue;
      const Point2 p = positions[i];
      centroids[a] = {(centroids[a].x * count[a] - p.x) / (count[a] - 1.0),
                      (centroids[a].y * count[a] - p.y) / (count[a] - 1.0)};
      centroids[best] = {(centroids[best].x * count[best] + p.x) / (count[best] + 1.0),
                         (centroids[best].y * count[best] + p.y) / (count[best] + 1.0)};
      count[a] -= 1.0;
      count[best] += 1.0;
      labels[i] = best;
      moved = any = true;
    }
    if (!moved) break;
    centroids = cluster_means(positions, labels, centroids);
  }
  return any;
}

struct RunResult {
  std::vector<Point2> centroids;
  std::vector<std::size_t> labels;
  double inertia;
};

RunResult lloyd_run(std::span<const Point2> positions, std::vector<Point2> centroids,
                    const KMeansOptions& options) {
  const std::size_t n = positions.size();
  std::vector<std::size_t> labels(n), prev;
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) labels[i] = nearest(positions[i], centroids);
    repair_empty(positions, centroids, labels);
    const double inertia = clustering_inertia(positions, centroids, labels);
    if (inertia > prev_inertia * (1.0 + 1e-12) + 1e-12) {
      throw std::logic_error("k-means inertia increased between Lloyd iterations");
    }
    prev_inertia = inertia;
    auto next = cluster_means(positions, labels, centroids);
    double move = 0.0;
    for (std::size_t j = 0; j < centroids.size(); ++j) {
      move = std::max(move, std::sqrt(sq_dist(next[j], centroids[j])));
    }
    centroids = std::move(next);
    if (labels == prev || move <= options.tol) break;
    prev = labels;
  }
  for (std::size_t i = 0; i < n; ++i) labels[i] = nearest(positions[i], centroids);
  repair_empty(positions, centroids, labels);
  centroids = cluster_means(positions, labels, centroids);
  if (hartigan_refine(positions, centroids, labels, options.max_iter)) {
    centroids = cluster_means(positions, labels, centroids);
  }
  const double inertia = clustering_inertia(positions, centroids, labels);
  return {std::move(centroids), std::move(labels), inertia};
}

}  // namespace

ClusterAssignment ClusterAssignment::from_labels(std::span<const Point2> positions,
                                                 std::vector<Point2> centroids,
                                                 std::vector<std::size_t> labels) {
  if (labels.size() != positions.size()) {
    throw std::invalid_argument("one label per position required");
  }
  ClusterAssignment a;
  const std::size_t k = centroids.size();
  a.sizes.assign(k, 0);
  a.members.assign(k, {});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw std::invalid_argument("label out of range");
    ++a.sizes[labels[i]];
    a.members[labels[i]].push_back(i);
  }
  a.inertia = clustering_inertia(positions, centroids, labels);
  a.centroids = std::move(centroids);
  a.labels = std::move(labels);
  return a;
}

double clustering_inertia(std::span<const Point2> positions, std::span<const Point2> centroids,
                          std::span<const std::size_t> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    total += sq_dist(positions[i], centroids[labels[i]]);
  }
  return total;
}

LloydResult lloyd_step(std::span<const Point2> positions, std::span<const Point2> centroids) {
  if (centroids.empty()) {
    throw std::invalid_argument("lloyd_step needs at least one centroid");
  }
  LloydResult r;
  r.labels.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double d = 0.0;
    r.labels[i] = nearest(positions[i], centroids, &d);
    r.inertia += d;
  }
  r.centroids = cluster_means(positions, r.labels, centroids);
  return r;
}

ClusterAssignment kmeans(std::span<const Point2> positions, std::size_t k, RandomStream& rng,
                         const KMeansOptions& options) {
  if (k == 0 || k > positions.size()) {
    throw std::invalid_argument("k-means requires 1 <= k <= number of points");
  }
  if (options.restarts == 0) {
    throw std::invalid_argument("k-means requires at least one restart");
  }
  std::vector<std::uint64_t> seeds(options.restarts);
  for (auto& s : seeds) s = rng.engine()();

  RunResult best{{}, {}, std::numeric_limits<double>::infinity()};
  for (std::uint64_t seed : seeds) {
    RandomStream sub(seed);
    RunResult run = lloyd_run(positions, kmeanspp_seed(positions, k, sub), options);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return ClusterAssignment::from_labels(positions, std::move(best.centroids), std::move(best.labels));
}

}  // namespace uavcov
