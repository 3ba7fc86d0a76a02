#pragma once

#include <vector>

#include "clot/matrix.hpp"

namespace clot {

// row_i -> log sum_j exp(m_ij), max-shifted so it never overflows.
std::vector<double> logsumexp_rows(const DenseMatrix& m);

// Row-wise softmax of m / temperature. Each output row sums to 1.
DenseMatrix softmax_rows(const DenseMatrix& m, double temperature);

// Pairwise cosine similarity between rows of a and rows of b (n x m).
// Rows with zero norm yield similarity 0 rather than NaN.
DenseMatrix cosine_matrix(const DenseMatrix& a, const DenseMatrix& b);

// Generalized KL for unnormalized measures: sum p log(p/q) - p + q.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace clot
