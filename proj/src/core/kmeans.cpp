#include "clot/kmeans.hpp"

#include <cstring>
#include <limits>

#include "clot/kernels/kernels.hpp"

namespace clot {
namespace {

// Nearest centroid under squared Euclidean distance; ties to lowest index.
std::size_t nearest(const DenseMatrix& points, std::size_t i, const DenseMatrix& centroids,
                    double* dist_out) {
  const auto& k = kernels::ops();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = k.sq_dist(points.row(i), centroids.row(c), points.cols);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

DenseMatrix seed_plus_plus(const DenseMatrix& points, std::size_t k, Rng& rng) {
  const auto& kr = kernels::ops();
  const std::size_t n = points.rows;
  DenseMatrix centroids(k, points.cols);

  std::size_t first = rng.uniform_below(n);
  std::memcpy(centroids.row(0), points.row(first), points.cols * sizeof(double));

  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = kr.sq_dist(points.row(i), centroids.row(c - 1), points.cols);
      if (d < d2[i]) d2[i] = d;
      total += d2[i];
    }
    std::size_t pick;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_below(n);  // all points coincide with chosen centroids
    }
    std::memcpy(centroids.row(c), points.row(pick), points.cols * sizeof(double));
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const DenseMatrix& points, std::size_t k, Rng& rng, std::size_t max_iter) {
  const std::size_t n = points.rows;
  const std::size_t d = points.cols;
  if (k < 1 || n < k) throw ParamError("kmeans: need n >= k >= 1");

  KMeansResult res;
  res.centroids = seed_plus_plus(points, k, rng);
  res.assignments.assign(n, 0);

  std::vector<double> point_d2(n, 0.0);
  std::vector<std::size_t> counts(k, 0);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest(points, i, res.centroids, &point_d2[i]);
      if (a != res.assignments[i]) {
        res.assignments[i] = a;
        changed = true;
      }
      inertia += point_d2[i];
    }
    res.inertia = inertia;
    res.inertia_trace.push_back(inertia);
    if (!changed && iter > 0) break;

    // Mean update.
    std::fill(res.centroids.data.begin(), res.centroids.data.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      kernels::ops().axpy(1.0, points.row(i), res.centroids.row(res.assignments[i]), d);
      ++counts[res.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (std::size_t j = 0; j < d; ++j) res.centroids(c, j) *= inv;
    }
    // Reseed empty clusters to the farthest point from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (point_d2[i] > far_d) {
          far_d = point_d2[i];
          far = i;
        }
      }
      std::memcpy(res.centroids.row(c), points.row(far), d * sizeof(double));
      point_d2[far] = 0.0;  // do not hand the same point to the next empty cluster
    }
  }

  // Final assignment against the returned centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.assignments[i] = nearest(points, i, res.centroids, &point_d2[i]);
    inertia += point_d2[i];
  }
  res.inertia = inertia;
  ensure_finite(res.centroids, "kmeans centroids");
  return res;
}

}  // namespace clot
