#include "clot/reduce.hpp"

#include <cmath>

#include "clot/kernels/kernels.hpp"

namespace clot {

std::vector<double> logsumexp_rows(const DenseMatrix& m) {
  require_nonempty(m, "logsumexp_rows");
  const auto& k = kernels::ops();
  std::vector<double> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double mx = k.max(m.row(i), m.cols);
    if (!std::isfinite(mx)) {
      out[i] = mx;  // all -inf (or a stray inf) propagates as-is
      continue;
    }
    out[i] = mx + std::log(k.sum_exp_shift(m.row(i), m.cols, mx));
  }
  return out;
}

DenseMatrix softmax_rows(const DenseMatrix& m, double temperature) {
  require_nonempty(m, "softmax_rows");
  if (!(temperature > 0.0)) throw ParamError("softmax_rows: temperature must be positive");
  const auto& k = kernels::ops();
  const double inv_t = 1.0 / temperature;
  DenseMatrix scratch(1, m.cols);
  DenseMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* s = scratch.row(0);
    const double* src = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) s[j] = src[j] * inv_t;
    const double mx = k.max(s, m.cols);
    double* dst = out.row(i);
    const double z = k.exp_shift_store(s, dst, m.cols, mx);
    const double inv_z = 1.0 / z;
    for (std::size_t j = 0; j < m.cols; ++j) dst[j] *= inv_z;
  }
  return out;
}

DenseMatrix cosine_matrix(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) throw DimensionError("cosine_matrix: feature dimensions disagree");
  const auto& k = kernels::ops();
  std::vector<double> inv_na(a.rows), inv_nb(b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double n = std::sqrt(k.dot(a.row(i), a.row(i), a.cols));
    inv_na[i] = n > 0.0 ? 1.0 / n : 0.0;
  }
  for (std::size_t j = 0; j < b.rows; ++j) {
    const double n = std::sqrt(k.dot(b.row(j), b.row(j), b.cols));
    inv_nb[j] = n > 0.0 ? 1.0 / n : 0.0;
  }
  DenseMatrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      double v = k.dot(a.row(i), b.row(j), a.cols) * inv_na[i] * inv_nb[j];
      if (v > 1.0) v = 1.0;
      if (v < -1.0) v = -1.0;
      c(i, j) = v;
    }
  }
  return c;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DimensionError("kl_divergence: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(q[i] > 0.0)) throw ParamError("kl_divergence: q must be strictly positive");
    if (p[i] < 0.0) throw ParamError("kl_divergence: p must be nonnegative");
    if (p[i] > 0.0) acc += p[i] * std::log(p[i] / q[i]) - p[i] + q[i];
    else acc += q[i];  // 0*log 0 := 0
  }
  return acc;
}

}  // namespace clot
