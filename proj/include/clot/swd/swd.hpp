#pragma once

#include "clot/matrix.hpp"
#include "clot/rng.hpp"

namespace clot::swd {

// M = p_factor * d random directions, each row unit-norm on S^{d-1}.
struct ProjectionSet {
  DenseMatrix directions;  // M x d
  std::size_t p_factor = 0;
};

ProjectionSet sample_projections(std::size_t d, std::size_t p_factor, Rng& rng);

// Sliced discrepancy between rows of x (N x d) and rows of a (K x d):
// entry (i,j) = ( (1/M) sum_m (theta_m . x_i - theta_m . a_j)^2 )^(1/p),
// quadratic ground loss per projection. Only p = 1 is exercised.
DenseMatrix swd_matrix(const DenseMatrix& x, const DenseMatrix& a, const ProjectionSet& proj,
                       std::size_t p = 1);

}  // namespace clot::swd
