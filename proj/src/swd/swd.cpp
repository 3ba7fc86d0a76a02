#include "clot/swd/swd.hpp"

#include <cmath>

#include "clot/kernels/kernels.hpp"

namespace clot::swd {

ProjectionSet sample_projections(std::size_t d, std::size_t p_factor, Rng& rng) {
  if (d < 1 || p_factor < 1) throw ParamError("sample_projections: d and p_factor must be >= 1");
  const std::size_t m = p_factor * d;
  ProjectionSet set;
  set.p_factor = p_factor;
  set.directions = DenseMatrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    double* row = set.directions.row(r);
    double norm2 = 0.0;
    do {
      norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = rng.normal();
        norm2 += row[j] * row[j];
      }
    } while (norm2 == 0.0);
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t j = 0; j < d; ++j) row[j] *= inv;
  }
  return set;
}

DenseMatrix swd_matrix(const DenseMatrix& x, const DenseMatrix& a, const ProjectionSet& proj,
                       std::size_t p) {
  if (x.cols != a.cols || x.cols != proj.directions.cols)
    throw DimensionError("swd_matrix: feature dimensions disagree");
  if (p < 1) throw ParamError("swd_matrix: p must be >= 1");

  // Project both sides once: px (N x M), pa (K x M).
  const DenseMatrix px = matmul_nt(x, proj.directions);
  const DenseMatrix pa = matmul_nt(a, proj.directions);
  const std::size_t m = proj.directions.rows;
  const double inv_m = 1.0 / static_cast<double>(m);

  DenseMatrix out(x.rows, a.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = 0; j < a.rows; ++j) {
      const double mean_sq = kernels::ops().sq_dist(px.row(i), pa.row(j), m) * inv_m;
      out(i, j) = p == 1 ? mean_sq : std::pow(mean_sq, 1.0 / static_cast<double>(p));
    }
  }
  return out;
}

}  // namespace clot::swd
