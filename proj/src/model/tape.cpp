#include "clot/model/tape.hpp"

#include <cmath>
#include <limits>

#include "clot/kernels/kernels.hpp"
#include "clot/reduce.hpp"

namespace clot::model {

namespace {
constexpr double kLayerNormEps = 1e-8;
constexpr double kNormFloor = 1e-30;  // rows below this norm are treated as zero
}  // namespace

const Tape::Node& Tape::at(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

DenseMatrix& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = DenseMatrix(n.value.rows, n.value.cols, 0.0);
  return n.grad;
}

int Tape::leaf(DenseMatrix v, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

int Tape::matmul(int a, int b) {
  Node n;
  n.op = Op::Matmul;
  n.a = a;
  n.b = b;
  n.value = clot::matmul(at(a).value, at(b).value);
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

int Tape::matmul_nt(int a, int b) {
  Node n;
  n.op = Op::MatmulNT;
  n.a = a;
  n.b = b;
  n.value = clot::matmul_nt(at(a).value, at(b).value);
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  if (!at(a).value.same_shape(at(b).value)) throw DimensionError("tape add: shape mismatch");
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = at(a).value;
  add_scaled_inplace(n.value, at(b).value, 1.0);
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

int Tape::add_rowvec(int a, int bias) {
  const DenseMatrix& av = at(a).value;
  const DenseMatrix& bv = at(bias).value;
  if (bv.rows != 1 || bv.cols != av.cols) throw DimensionError("tape add_rowvec: bad bias shape");
  Node n;
  n.op = Op::AddRowVec;
  n.a = a;
  n.b = bias;
  n.value = av;
  for (std::size_t i = 0; i < av.rows; ++i)
    kernels::ops().axpy(1.0, bv.row(0), n.value.row(i), av.cols);
  n.requires_grad = at(a).requires_grad || at(bias).requires_grad;
  return push(std::move(n));
}

int Tape::mul_rowvec(int a, int gain) {
  const DenseMatrix& av = at(a).value;
  const DenseMatrix& gv = at(gain).value;
  if (gv.rows != 1 || gv.cols != av.cols) throw DimensionError("tape mul_rowvec: bad gain shape");
  Node n;
  n.op = Op::MulRowVec;
  n.a = a;
  n.b = gain;
  n.value = DenseMatrix(av.rows, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) n.value(i, j) = av(i, j) * gv(0, j);
  n.requires_grad = at(a).requires_grad || at(gain).requires_grad;
  return push(std::move(n));
}

int Tape::scale_const(int a, double s) {
  Node n;
  n.op = Op::ScaleConst;
  n.a = a;
  n.s0 = s;
  n.value = scaled(at(a).value, s);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::add_scalar(int a, int s) {
  if (at(s).value.rows != 1 || at(s).value.cols != 1)
    throw DimensionError("tape add_scalar: scalar node must be 1x1");
  Node n;
  n.op = Op::AddScalar;
  n.a = a;
  n.b = s;
  const double sv = at(s).value(0, 0);
  n.value = at(a).value;
  for (double& v : n.value.data) v += sv;
  n.requires_grad = at(a).requires_grad || at(s).requires_grad;
  return push(std::move(n));
}

int Tape::mul_scalar(int a, int s) {
  if (at(s).value.rows != 1 || at(s).value.cols != 1)
    throw DimensionError("tape mul_scalar: scalar node must be 1x1");
  Node n;
  n.op = Op::MulScalar;
  n.a = a;
  n.b = s;
  n.value = scaled(at(a).value, at(s).value(0, 0));
  n.requires_grad = at(a).requires_grad || at(s).requires_grad;
  return push(std::move(n));
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::Relu;
  n.a = a;
  n.value = at(a).value;
  for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a;
  n.value = at(a).value;
  for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::softmax_rows(int a) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a;
  n.value = clot::softmax_rows(at(a).value, 1.0);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::layernorm_rows(int a) {
  const DenseMatrix& x = at(a).value;
  require_nonempty(x, "tape layernorm_rows");
  Node n;
  n.op = Op::LayerNormRows;
  n.a = a;
  n.value = DenseMatrix(x.rows, x.cols);
  n.aux = DenseMatrix(x.rows, 1);  // 1/std per row
  const double inv_d = 1.0 / static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* src = x.row(i);
    const double mean = kernels::ops().sum(src, x.cols) * inv_d;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double c = src[j] - mean;
      var += c * c;
    }
    var *= inv_d;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    n.aux(i, 0) = inv_std;
    double* dst = n.value.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) dst[j] = (src[j] - mean) * inv_std;
  }
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::hadamard_const(int a, DenseMatrix mask) {
  if (!at(a).value.same_shape(mask)) throw DimensionError("tape hadamard_const: shape mismatch");
  Node n;
  n.op = Op::HadamardConst;
  n.a = a;
  n.value = at(a).value;
  for (std::size_t i = 0; i < mask.size(); ++i) n.value.data[i] *= mask.data[i];
  n.aux = std::move(mask);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::slice_cols(int a, std::size_t c0, std::size_t c1) {
  const DenseMatrix& x = at(a).value;
  if (c0 >= c1 || c1 > x.cols) throw DimensionError("tape slice_cols: bad column range");
  Node n;
  n.op = Op::SliceCols;
  n.a = a;
  n.c0 = c0;
  n.c1 = c1;
  n.value = DenseMatrix(x.rows, c1 - c0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = c0; j < c1; ++j) n.value(i, j - c0) = x(i, j);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) throw DimensionError("tape concat_cols: no inputs");
  std::size_t rows = at(parts[0]).value.rows;
  std::size_t cols = 0;
  bool req = false;
  for (int p : parts) {
    if (at(p).value.rows != rows) throw DimensionError("tape concat_cols: row counts disagree");
    cols += at(p).value.cols;
    req = req || at(p).requires_grad;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.list = parts;
  n.value = DenseMatrix(rows, cols);
  std::size_t off = 0;
  for (int p : parts) {
    const DenseMatrix& v = at(p).value;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < v.cols; ++j) n.value(i, off + j) = v(i, j);
    off += v.cols;
  }
  n.requires_grad = req;
  return push(std::move(n));
}

int Tape::cosine_nt(int a, int b) {
  const DenseMatrix& av = at(a).value;
  const DenseMatrix& bv = at(b).value;
  if (av.cols != bv.cols) throw DimensionError("tape cosine_nt: feature dimensions disagree");
  Node n;
  n.op = Op::CosineNT;
  n.a = a;
  n.b = b;
  n.aux = DenseMatrix(av.rows, 1);
  n.aux2 = DenseMatrix(bv.rows, 1);
  for (std::size_t i = 0; i < av.rows; ++i)
    n.aux(i, 0) = std::sqrt(kernels::ops().dot(av.row(i), av.row(i), av.cols));
  for (std::size_t j = 0; j < bv.rows; ++j)
    n.aux2(j, 0) = std::sqrt(kernels::ops().dot(bv.row(j), bv.row(j), bv.cols));
  n.value = DenseMatrix(av.rows, bv.rows);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < bv.rows; ++j) {
      const double na = n.aux(i, 0), nb = n.aux2(j, 0);
      n.value(i, j) = (na > kNormFloor && nb > kNormFloor)
                          ? kernels::ops().dot(av.row(i), bv.row(j), av.cols) / (na * nb)
                          : 0.0;
    }
  }
  n.requires_grad = at(a).requires_grad || at(b).requires_grad;
  return push(std::move(n));
}

int Tape::weighted_sum(int a, DenseMatrix weights) {
  if (!at(a).value.same_shape(weights)) throw DimensionError("tape weighted_sum: shape mismatch");
  Node n;
  n.op = Op::WeightedSum;
  n.a = a;
  const double v =
      kernels::ops().dot(at(a).value.data.data(), weights.data.data(), weights.size());
  n.aux = std::move(weights);
  n.value = DenseMatrix(1, 1, v);
  n.requires_grad = at(a).requires_grad;
  return push(std::move(n));
}

int Tape::cross_entropy(int p, DenseMatrix target, double clamp) {
  const DenseMatrix& pv = at(p).value;
  if (!pv.same_shape(target)) throw DimensionError("tape cross_entropy: shape mismatch");
  Node n;
  n.op = Op::CrossEntropy;
  n.a = p;
  n.s0 = clamp;
  double loss = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (target.data[i] != 0.0)
      loss -= target.data[i] * std::log(pv.data[i] > clamp ? pv.data[i] : clamp);
  }
  n.aux = std::move(target);
  n.value = DenseMatrix(1, 1, loss);
  n.requires_grad = at(p).requires_grad;
  return push(std::move(n));
}

double Tape::min_abs_relu_input() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op != Op::Relu) continue;
    for (double v : nodes_[static_cast<std::size_t>(n.a)].value.data)
      margin = std::min(margin, std::fabs(v));
  }
  return margin;
}

double Tape::min_cosine_norm() const {
  double norm = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_) {
    if (n.op != Op::CosineNT) continue;
    for (double v : n.aux.data) norm = std::min(norm, v);
    for (double v : n.aux2.data) norm = std::min(norm, v);
  }
  return norm;
}

void Tape::backward(int root) {
  Node& r = nodes_[static_cast<std::size_t>(root)];
  if (r.value.rows != 1 || r.value.cols != 1)
    throw StateError("tape backward: root must be a 1x1 node");
  grad_buf(root)(0, 0) += 1.0;
  for (int id = root; id >= 0; --id) backward_node(id);
}

void Tape::backward_node(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad || n.grad.empty()) return;
  const DenseMatrix& g = n.grad;
  const auto& k = kernels::ops();

  auto need = [&](int in) { return in >= 0 && at(in).requires_grad; };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Matmul: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), clot::matmul_nt(g, at(n.b).value), 1.0);
      if (need(n.b)) add_scaled_inplace(grad_buf(n.b), clot::matmul_tn(at(n.a).value, g), 1.0);
      break;
    }
    case Op::MatmulNT: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), clot::matmul(g, at(n.b).value), 1.0);
      if (need(n.b)) add_scaled_inplace(grad_buf(n.b), clot::matmul_tn(g, at(n.a).value), 1.0);
      break;
    }
    case Op::Add: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), g, 1.0);
      if (need(n.b)) add_scaled_inplace(grad_buf(n.b), g, 1.0);
      break;
    }
    case Op::AddRowVec: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), g, 1.0);
      if (need(n.b)) {
        DenseMatrix& gb = grad_buf(n.b);
        for (std::size_t i = 0; i < g.rows; ++i) k.axpy(1.0, g.row(i), gb.row(0), g.cols);
      }
      break;
    }
    case Op::MulRowVec: {
      const DenseMatrix& av = at(n.a).value;
      const DenseMatrix& gv = at(n.b).value;
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) ga(i, j) += g(i, j) * gv(0, j);
      }
      if (need(n.b)) {
        DenseMatrix& gg = grad_buf(n.b);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) gg(0, j) += g(i, j) * av(i, j);
      }
      break;
    }
    case Op::ScaleConst: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), g, n.s0);
      break;
    }
    case Op::AddScalar: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), g, 1.0);
      if (need(n.b)) grad_buf(n.b)(0, 0) += k.sum(g.data.data(), g.size());
      break;
    }
    case Op::MulScalar: {
      const double sv = at(n.b).value(0, 0);
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), g, sv);
      if (need(n.b))
        grad_buf(n.b)(0, 0) += k.dot(g.data.data(), at(n.a).value.data.data(), g.size());
      break;
    }
    case Op::Relu: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        const DenseMatrix& av = at(n.a).value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (av.data[i] > 0.0) ga.data[i] += g.data[i];
      }
      break;
    }
    case Op::Sigmoid: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += g.data[i] * y * (1.0 - y);
        }
      }
      break;
    }
    case Op::SoftmaxRows: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.rows; ++i) {
          const double* gr = g.row(i);
          const double* yr = n.value.row(i);
          const double inner = k.dot(gr, yr, g.cols);
          double* dst = ga.row(i);
          for (std::size_t j = 0; j < g.cols; ++j) dst[j] += yr[j] * (gr[j] - inner);
        }
      }
      break;
    }
    case Op::LayerNormRows: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        const double inv_d = 1.0 / static_cast<double>(g.cols);
        for (std::size_t i = 0; i < g.rows; ++i) {
          const double* gr = g.row(i);
          const double* xh = n.value.row(i);
          const double inv_std = n.aux(i, 0);
          const double m1 = k.sum(gr, g.cols) * inv_d;
          const double m2 = k.dot(gr, xh, g.cols) * inv_d;
          double* dst = ga.row(i);
          for (std::size_t j = 0; j < g.cols; ++j)
            dst[j] += inv_std * (gr[j] - m1 - xh[j] * m2);
        }
      }
      break;
    }
    case Op::HadamardConst: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.aux.data[i];
      }
      break;
    }
    case Op::SliceCols: {
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) ga(i, n.c0 + j) += g(i, j);
      }
      break;
    }
    case Op::ConcatCols: {
      std::size_t off = 0;
      for (int p : n.list) {
        const std::size_t w = at(p).value.cols;
        if (need(p)) {
          DenseMatrix& gp = grad_buf(p);
          for (std::size_t i = 0; i < g.rows; ++i)
            for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, off + j);
        }
        off += w;
      }
      break;
    }
    case Op::CosineNT: {
      const DenseMatrix& av = at(n.a).value;
      const DenseMatrix& bv = at(n.b).value;
      const std::size_t d = av.cols;
      if (need(n.a)) {
        DenseMatrix& ga = grad_buf(n.a);
        for (std::size_t i = 0; i < av.rows; ++i) {
          const double na = n.aux(i, 0);
          if (na <= kNormFloor) continue;
          double along_a = 0.0;  // sum_j g_ij * cos_ij
          for (std::size_t j = 0; j < bv.rows; ++j) {
            const double nb = n.aux2(j, 0);
            if (nb <= kNormFloor) continue;
            const double w = g(i, j) / (na * nb);
            k.axpy(w, bv.row(j), ga.row(i), d);
            along_a += g(i, j) * n.value(i, j);
          }
          k.axpy(-along_a / (na * na), av.row(i), ga.row(i), d);
        }
      }
      if (need(n.b)) {
        DenseMatrix& gb = grad_buf(n.b);
        for (std::size_t j = 0; j < bv.rows; ++j) {
          const double nb = n.aux2(j, 0);
          if (nb <= kNormFloor) continue;
          double along_b = 0.0;
          for (std::size_t i = 0; i < av.rows; ++i) {
            const double na = n.aux(i, 0);
            if (na <= kNormFloor) continue;
            const double w = g(i, j) / (na * nb);
            k.axpy(w, av.row(i), gb.row(j), d);
            along_b += g(i, j) * n.value(i, j);
          }
          k.axpy(-along_b / (nb * nb), bv.row(j), gb.row(j), d);
        }
      }
      break;
    }
    case Op::WeightedSum: {
      if (need(n.a)) add_scaled_inplace(grad_buf(n.a), n.aux, g(0, 0));
      break;
    }
    case Op::CrossEntropy: {
      if (need(n.a)) {
        DenseMatrix& gp = grad_buf(n.a);
        const DenseMatrix& pv = at(n.a).value;
        const double gs = g(0, 0);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          if (n.aux.data[i] != 0.0 && pv.data[i] > n.s0)
            gp.data[i] -= gs * n.aux.data[i] / pv.data[i];
        }
      }
      break;
    }
  }
}

}  // namespace clot::model
