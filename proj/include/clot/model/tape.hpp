#pragma once

#include <vector>

#include "clot/matrix.hpp"

namespace clot::model {

// Define-by-run reverse-mode tape over DenseMatrix values. Nodes are handles
// (indices) into the tape; values are computed eagerly at node creation and
// gradients on backward(). First-order only: backward produces plain
// matrices, never new tape nodes.
//
// Pseudo-label targets enter exclusively through cross_entropy's constant
// target argument, so no gradient can ever reach a solver output.
class Tape {
 public:
  int leaf(DenseMatrix v, bool requires_grad = true);
  int constant(DenseMatrix v) { return leaf(std::move(v), false); }

  int matmul(int a, int b);     // A * B
  int matmul_nt(int a, int b);  // A * B^T
  int add(int a, int b);
  int add_rowvec(int a, int bias);  // bias is 1 x cols, broadcast over rows
  int mul_rowvec(int a, int gain);  // gain is 1 x cols, broadcast over rows
  int scale_const(int a, double s);
  int add_scalar(int a, int s);  // s is a 1x1 node, broadcast everywhere
  int mul_scalar(int a, int s);
  int relu(int a);
  int sigmoid(int a);
  int softmax_rows(int a);
  int layernorm_rows(int a);  // per-row mean 0 / variance 1 (no affine)
  int hadamard_const(int a, DenseMatrix mask);  // dropout masks and the like
  int slice_cols(int a, std::size_t c0, std::size_t c1);
  int concat_cols(const std::vector<int>& parts);
  int cosine_nt(int a, int b);  // pairwise row cosine, n x m
  int weighted_sum(int a, DenseMatrix weights);  // sum_ij w_ij * a_ij as 1x1
  // -sum_ij t_ij * log(max(p_ij, clamp)) as a 1x1 node; t is a constant.
  int cross_entropy(int p, DenseMatrix target, double clamp = 1e-12);

  const DenseMatrix& value(int id) const { return nodes_[id].value; }
  const DenseMatrix& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  // Accumulates gradients of a 1x1 root into every reachable node.
  void backward(int root);

  std::size_t size() const { return nodes_.size(); }

  // Smallest |input| over all ReLU nodes; +inf when there are none. Finite
  // differencing is only valid when this clears the step size.
  double min_abs_relu_input() const;

  // Smallest row norm entering any cosine node; +inf when there are none.
  // Cosine curvature grows like 1/norm^2, so finite differences also need
  // this bounded away from zero.
  double min_cosine_norm() const;

 private:
  enum class Op {
    Leaf,
    Matmul,
    MatmulNT,
    Add,
    AddRowVec,
    MulRowVec,
    ScaleConst,
    AddScalar,
    MulScalar,
    Relu,
    Sigmoid,
    SoftmaxRows,
    LayerNormRows,
    HadamardConst,
    SliceCols,
    ConcatCols,
    CosineNT,
    WeightedSum,
    CrossEntropy,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    std::vector<int> list;  // ConcatCols inputs
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix aux;   // op cache: masks, targets, inv-std, norms
    DenseMatrix aux2;  // second cache (cosine norms of b)
    double s0 = 0.0;
    std::size_t c0 = 0, c1 = 0;
    bool requires_grad = false;
  };

  int push(Node n);
  DenseMatrix& grad_buf(int id);
  void backward_node(int id);
  const Node& at(int id) const;

  std::vector<Node> nodes_;
};

}  // namespace clot::model
