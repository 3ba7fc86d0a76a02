#pragma once

#include <optional>

#include "clot/matrix.hpp"
#include "clot/swd/swd.hpp"

namespace clot::cost {

// One OT instance: the linear cost plus the intra-source / intra-target
// structure matrices. For large n the dense c_rows is not materialized;
// row_band_radius carries the same information (c_rows[i][k] = 1 iff
// 0 < |i-k| <= radius) and the solver works off the band directly.
struct CostBundle {
  DenseMatrix c_kot;    // n x m
  DenseMatrix c_rows;   // n x n, 0/1 symmetric, zero diagonal (may be empty)
  DenseMatrix c_cols;   // m x m, 0/1 symmetric, zero diagonal
  std::size_t row_band_radius = 0;
  bool has_dense_rows() const { return !c_rows.empty(); }
};

// Z_ij = |(i+1)/n - (j+1)/k|, the position prior aligning frame rank with
// action rank; entries in [0, 1).
DenseMatrix temporal_prior(std::size_t n, std::size_t k);

// Band radius from a fractional width: ceil(fraction * n), clamped to n-1.
std::size_t band_radius(std::size_t n, double radius_fraction);

// c_rows[i][k] = 1 iff 0 < |i-k| <= ceil(radius_fraction*n); c_cols = 1 - I.
std::pair<DenseMatrix, DenseMatrix> structure_matrices(std::size_t n, std::size_t k,
                                                       double radius_fraction);

// Stage-1 linear cost: 1 - cos(x_i, a_j) + rho * Z_ij + SWD(x_i, a_j).
DenseMatrix frame_kot_cost(const DenseMatrix& x, const DenseMatrix& a, double rho,
                           const swd::ProjectionSet& proj);

// Stage-2 linear cost over (K', K): 1 - cos(s_i, a_j) + rho_s * Z_ij.
DenseMatrix segment_kot_cost(const DenseMatrix& s, const DenseMatrix& a, double rho_s);

// Stage-3 linear cost: as frame_kot_cost, with the SWD term only when a
// projection set is supplied (default configuration leaves it out).
DenseMatrix refined_kot_cost(const DenseMatrix& f_r, const DenseMatrix& a, double rho,
                             const swd::ProjectionSet* proj);

// Bundles a linear cost with band/off-diagonal structure. Dense c_rows is
// materialized only up to `dense_limit` rows.
CostBundle make_bundle(DenseMatrix c_kot, double radius_fraction, std::size_t dense_limit = 2048);
CostBundle make_bundle_radius(DenseMatrix c_kot, std::size_t radius, std::size_t dense_limit = 2048);

}  // namespace clot::cost
