#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "clot/error.hpp"

namespace clot {

// Row-major dense matrix of 64-bit reals: the shared carrier for features,
// embeddings, cost matrices and transport plans.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rs);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::size_t size() const { return rows * cols; }
  bool empty() const { return rows == 0 || cols == 0; }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix transposed(const DenseMatrix& m);

void add_scaled_inplace(DenseMatrix& y, const DenseMatrix& x, double alpha);  // y += alpha*x
DenseMatrix scaled(const DenseMatrix& m, double s);

bool all_finite(const DenseMatrix& m);
void ensure_finite(const DenseMatrix& m, const char* what);  // throws NumericError
void require_nonempty(const DenseMatrix& m, const char* what);

}  // namespace clot
