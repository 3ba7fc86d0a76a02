#include "clot/matrix.hpp"

#include <cmath>
#include <string>

#include "clot/kernels/kernels.hpp"

namespace clot {

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rs) {
  DenseMatrix m(rs.size(), rs.size() ? rs.begin()->size() : 0);
  std::size_t i = 0;
  for (const auto& r : rs) {
    if (r.size() != m.cols) throw DimensionError("from_rows: ragged row lengths");
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions disagree");
  const auto& k = kernels::ops();
  DenseMatrix c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t l = 0; l < a.cols; ++l) {
      if (arow[l] != 0.0) k.axpy(arow[l], b.row(l), crow, b.cols);
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) throw DimensionError("matmul_nt: inner dimensions disagree");
  const auto& k = kernels::ops();
  DenseMatrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      c(i, j) = k.dot(a.row(i), b.row(j), a.cols);
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows) throw DimensionError("matmul_tn: inner dimensions disagree");
  const auto& k = kernels::ops();
  DenseMatrix c(a.cols, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (std::size_t l = 0; l < a.cols; ++l) {
      if (arow[l] != 0.0) k.axpy(arow[l], brow, c.row(l), b.cols);
    }
  }
  return c;
}

DenseMatrix transposed(const DenseMatrix& m) {
  DenseMatrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

void add_scaled_inplace(DenseMatrix& y, const DenseMatrix& x, double alpha) {
  if (!y.same_shape(x)) throw DimensionError("add_scaled_inplace: shape mismatch");
  kernels::ops().axpy(alpha, x.data.data(), y.data.data(), x.size());
}

DenseMatrix scaled(const DenseMatrix& m, double s) {
  DenseMatrix r(m.rows, m.cols);
  for (std::size_t i = 0; i < m.size(); ++i) r.data[i] = m.data[i] * s;
  return r;
}

bool all_finite(const DenseMatrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void ensure_finite(const DenseMatrix& m, const char* what) {
  if (!all_finite(m)) throw NumericError(std::string(what) + ": non-finite entries");
}

void require_nonempty(const DenseMatrix& m, const char* what) {
  if (m.empty()) throw DimensionError(std::string(what) + ": empty matrix");
}

}  // namespace clot
