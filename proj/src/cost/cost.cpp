#include "clot/cost/cost.hpp"

#include <cmath>

#include "clot/reduce.hpp"

namespace clot::cost {

DenseMatrix temporal_prior(std::size_t n, std::size_t k) {
  if (n < 1 || k < 1) throw ParamError("temporal_prior: sizes must be >= 1");
  DenseMatrix z(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double fi = static_cast<double>(i + 1) / static_cast<double>(n);
    for (std::size_t j = 0; j < k; ++j) {
      const double fj = static_cast<double>(j + 1) / static_cast<double>(k);
      z(i, j) = std::fabs(fi - fj);
    }
  }
  return z;
}

std::size_t band_radius(std::size_t n, double radius_fraction) {
  if (!(radius_fraction > 0.0) || radius_fraction > 1.0)
    throw ParamError("band_radius: radius fraction must be in (0, 1]");
  auto r = static_cast<std::size_t>(std::ceil(radius_fraction * static_cast<double>(n)));
  if (r < 1) r = 1;
  if (n > 1 && r > n - 1) r = n - 1;
  return r;
}

std::pair<DenseMatrix, DenseMatrix> structure_matrices(std::size_t n, std::size_t k,
                                                       double radius_fraction) {
  if (n < 1 || k < 1) throw ParamError("structure_matrices: sizes must be >= 1");
  const std::size_t r = band_radius(n, radius_fraction);
  DenseMatrix c_rows(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > r ? i - r : 0;
    const std::size_t hi = std::min(n - 1, i + r);
    for (std::size_t j = lo; j <= hi; ++j)
      if (j != i) c_rows(i, j) = 1.0;
  }
  DenseMatrix c_cols(k, k, 1.0);
  for (std::size_t j = 0; j < k; ++j) c_cols(j, j) = 0.0;
  return {std::move(c_rows), std::move(c_cols)};
}

namespace {

// 1 - cos(x_i, a_j) + rho * Z_ij, the shared visual-plus-prior part.
DenseMatrix cosine_prior_cost(const DenseMatrix& x, const DenseMatrix& a, double rho) {
  if (x.cols != a.cols) throw DimensionError("kot cost: feature dimensions disagree");
  if (rho < 0.0) throw ParamError("kot cost: rho must be nonnegative");
  DenseMatrix c = cosine_matrix(x, a);
  const DenseMatrix z = temporal_prior(x.rows, a.rows);
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) = 1.0 - c(i, j) + rho * z(i, j);
  return c;
}

}  // namespace

DenseMatrix frame_kot_cost(const DenseMatrix& x, const DenseMatrix& a, double rho,
                           const swd::ProjectionSet& proj) {
  DenseMatrix c = cosine_prior_cost(x, a, rho);
  const DenseMatrix sw = swd::swd_matrix(x, a, proj, 1);
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += sw.data[i];
  return c;
}

DenseMatrix segment_kot_cost(const DenseMatrix& s, const DenseMatrix& a, double rho_s) {
  return cosine_prior_cost(s, a, rho_s);
}

DenseMatrix refined_kot_cost(const DenseMatrix& f_r, const DenseMatrix& a, double rho,
                             const swd::ProjectionSet* proj) {
  if (proj) return frame_kot_cost(f_r, a, rho, *proj);
  return cosine_prior_cost(f_r, a, rho);
}

CostBundle make_bundle_radius(DenseMatrix c_kot, std::size_t radius, std::size_t dense_limit) {
  const std::size_t n = c_kot.rows;
  const std::size_t m = c_kot.cols;
  if (n < 1 || m < 1) throw DimensionError("make_bundle: empty cost");
  if (radius < 1) radius = 1;
  if (n > 1 && radius > n - 1) radius = n - 1;

  CostBundle b;
  b.c_kot = std::move(c_kot);
  b.row_band_radius = radius;
  if (n <= dense_limit) {
    DenseMatrix rows(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i > radius ? i - radius : 0;
      const std::size_t hi = std::min(n - 1, i + radius);
      for (std::size_t j = lo; j <= hi; ++j)
        if (j != i) rows(i, j) = 1.0;
    }
    b.c_rows = std::move(rows);
  }
  DenseMatrix cols(m, m, 1.0);
  for (std::size_t j = 0; j < m; ++j) cols(j, j) = 0.0;
  b.c_cols = std::move(cols);
  return b;
}

CostBundle make_bundle(DenseMatrix c_kot, double radius_fraction, std::size_t dense_limit) {
  const std::size_t r = band_radius(c_kot.rows, radius_fraction);
  return make_bundle_radius(std::move(c_kot), r, dense_limit);
}

}  // namespace clot::cost
