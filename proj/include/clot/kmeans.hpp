#pragma once

#include <vector>

#include "clot/matrix.hpp"
#include "clot/rng.hpp"

namespace clot {

struct KMeansResult {
  DenseMatrix centroids;  // k x d
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each Lloyd assignment pass
};

// Lloyd iterations from k-means++ seeding until the assignment fixpoint or
// max_iter. Empty clusters are reseeded to the point farthest from its
// current centroid. Deterministic given the rng state.
KMeansResult kmeans(const DenseMatrix& points, std::size_t k, Rng& rng,
                    std::size_t max_iter = 100);

}  // namespace clot
