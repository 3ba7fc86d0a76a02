#pragma once

#include <string>
#include <vector>

#include "clot/matrix.hpp"

namespace clot::eval {

// Minimum-cost perfect assignment on a square cost matrix (Jonker-Volgenant
// style shortest augmenting paths, O(k^3)). Returns the column assigned to
// each row.
std::vector<std::size_t> hungarian(const DenseMatrix& cost);

enum class MatchLevel { Video, Activity };

// Frame co-occurrence counts between predicted and ground-truth labels,
// per video or pooled over the activity; Hungarian on negated counts; the
// predictions relabeled through the matching. Unmatched prediction clusters
// map to sentinel labels that never collide with ground truth.
std::vector<std::vector<int>> match_labels(const std::vector<std::vector<int>>& pred,
                                           const std::vector<std::vector<int>>& gt,
                                           MatchLevel level);

struct MetricsReport {
  double mof = 0.0;
  double f1 = 0.0;
  double miou = 0.0;
  std::vector<double> per_class_iou;  // classes present in ground truth, ascending
};

// MoF pooled over frames; per-class IoU pooled, averaged over classes present
// in ground truth; F1 per video over segments with the >50% overlap
// convention, averaged over videos.
MetricsReport compute_metrics(const std::vector<std::vector<int>>& pred,
                              const std::vector<std::vector<int>>& gt);

}  // namespace clot::eval
