#include "clot/eval/eval.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace clot::eval {

std::vector<std::size_t> hungarian(const DenseMatrix& cost) {
  if (cost.rows != cost.cols) throw DimensionError("hungarian: cost must be square");
  require_nonempty(cost, "hungarian");
  if (!all_finite(cost)) throw InputError("hungarian: non-finite costs");
  const std::size_t n = cost.rows;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based potentials/links; p[j] = row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

namespace {

int max_label(const std::vector<std::vector<int>>& seqs) {
  int mx = -1;
  for (const auto& s : seqs)
    for (int v : s) mx = std::max(mx, v);
  return mx;
}

// Confusion counts padded square (zero overlap for dummy rows/columns).
DenseMatrix confusion_square(const std::vector<const std::vector<int>*>& pred,
                             const std::vector<const std::vector<int>*>& gt, std::size_t k_pred,
                             std::size_t k_gt) {
  const std::size_t k = std::max(k_pred, k_gt);
  DenseMatrix counts(k, k, 0.0);
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const auto& pv = *pred[v];
    const auto& gv = *gt[v];
    for (std::size_t i = 0; i < pv.size(); ++i)
      counts(static_cast<std::size_t>(pv[i]), static_cast<std::size_t>(gv[i])) += 1.0;
  }
  return counts;
}

std::vector<int> apply_permutation(const std::vector<int>& pred,
                                   const std::vector<std::size_t>& perm, std::size_t k_gt) {
  std::vector<int> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t target = perm[static_cast<std::size_t>(pred[i])];
    // Clusters matched to a padding column carry a sentinel never present
    // in the ground truth.
    out[i] = target < k_gt ? static_cast<int>(target)
                           : static_cast<int>(k_gt + static_cast<std::size_t>(pred[i]));
  }
  return out;
}

}  // namespace

std::vector<std::vector<int>> match_labels(const std::vector<std::vector<int>>& pred,
                                           const std::vector<std::vector<int>>& gt,
                                           MatchLevel level) {
  if (pred.size() != gt.size()) throw InputError("match_labels: video counts disagree");
  if (pred.empty()) throw InputError("match_labels: no videos");
  for (std::size_t v = 0; v < pred.size(); ++v)
    if (pred[v].size() != gt[v].size())
      throw InputError("match_labels: length mismatch in video " + std::to_string(v));

  std::vector<std::vector<int>> out(pred.size());
  if (level == MatchLevel::Activity) {
    const auto k_pred = static_cast<std::size_t>(max_label(pred) + 1);
    const auto k_gt = static_cast<std::size_t>(max_label(gt) + 1);
    std::vector<const std::vector<int>*> ps, gs;
    for (std::size_t v = 0; v < pred.size(); ++v) {
      ps.push_back(&pred[v]);
      gs.push_back(&gt[v]);
    }
    DenseMatrix counts = confusion_square(ps, gs, k_pred, k_gt);
    const std::vector<std::size_t> perm = hungarian(scaled(counts, -1.0));
    for (std::size_t v = 0; v < pred.size(); ++v)
      out[v] = apply_permutation(pred[v], perm, k_gt);
  } else {
    for (std::size_t v = 0; v < pred.size(); ++v) {
      const auto k_pred = static_cast<std::size_t>(max_label({pred[v]}) + 1);
      const auto k_gt = static_cast<std::size_t>(max_label({gt[v]}) + 1);
      DenseMatrix counts = confusion_square({&pred[v]}, {&gt[v]}, k_pred, k_gt);
      const std::vector<std::size_t> perm = hungarian(scaled(counts, -1.0));
      out[v] = apply_permutation(pred[v], perm, k_gt);
    }
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<std::vector<int>>& pred,
                              const std::vector<std::vector<int>>& gt) {
  if (pred.size() != gt.size() || pred.empty())
    throw InputError("compute_metrics: empty or mismatched inputs");

  MetricsReport report;
  std::size_t total = 0, correct = 0;
  std::set<int> gt_classes;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    if (pred[v].size() != gt[v].size())
      throw InputError("compute_metrics: length mismatch in video " + std::to_string(v));
    total += gt[v].size();
    for (std::size_t i = 0; i < gt[v].size(); ++i) {
      gt_classes.insert(gt[v][i]);
      if (pred[v][i] == gt[v][i]) ++correct;
    }
  }
  if (total == 0) throw InputError("compute_metrics: no frames");
  report.mof = static_cast<double>(correct) / static_cast<double>(total);

  // Pooled per-class IoU over classes present in ground truth.
  double iou_sum = 0.0;
  for (int c : gt_classes) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t v = 0; v < pred.size(); ++v) {
      for (std::size_t i = 0; i < gt[v].size(); ++i) {
        const bool in_p = pred[v][i] == c;
        const bool in_g = gt[v][i] == c;
        inter += in_p && in_g;
        uni += in_p || in_g;
      }
    }
    const double iou = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    report.per_class_iou.push_back(iou);
    iou_sum += iou;
  }
  report.miou = iou_sum / static_cast<double>(gt_classes.size());

  // Segment F1 per video: a GT segment is recalled when more than half of
  // its frames carry its label; a predicted segment is precise when more
  // than half of its frames match ground truth of its label.
  double f1_sum = 0.0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const auto& pv = pred[v];
    const auto& gv = gt[v];
    std::size_t gt_segments = 0, recalled = 0;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= gv.size(); ++i) {
      if (i == gv.size() || gv[i] != gv[start]) {
        ++gt_segments;
        std::size_t hits = 0;
        for (std::size_t f = start; f < i; ++f) hits += pv[f] == gv[start];
        if (2 * hits > i - start) ++recalled;
        start = i;
      }
    }
    std::size_t pred_segments = 0, precise = 0;
    start = 0;
    for (std::size_t i = 1; i <= pv.size(); ++i) {
      if (i == pv.size() || pv[i] != pv[start]) {
        ++pred_segments;
        std::size_t hits = 0;
        for (std::size_t f = start; f < i; ++f) hits += gv[f] == pv[start];
        if (2 * hits > i - start) ++precise;
        start = i;
      }
    }
    const double recall =
        gt_segments ? static_cast<double>(recalled) / static_cast<double>(gt_segments) : 0.0;
    const double precision =
        pred_segments ? static_cast<double>(precise) / static_cast<double>(pred_segments) : 0.0;
    f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  report.f1 = f1_sum / static_cast<double>(pred.size());
  return report;
}

}  // namespace clot::eval
