#pragma once

#include <vector>

#include "clot/cost/cost.hpp"
#include "clot/matrix.hpp"

namespace clot::ot {

struct OtConfig {
  double alpha = 0.6;       // GW weight; 0 = pure KOT
  double epsilon = 0.07;    // entropic regularization
  double lambda = 1.0;      // KL penalty on the column marginal
  std::size_t outer_iters = 10;
  std::size_t inner_iters = 500;
  double tol = 1e-6;
};

void validate(const OtConfig& cfg);

struct Marginals {
  std::vector<double> mu;  // source, length n
  std::vector<double> nu;  // target, length m
  static Marginals uniform(std::size_t n, std::size_t m);
};

struct Coupling {
  DenseMatrix t;  // n x m, nonnegative
  std::vector<double> row_marginal;
  std::vector<double> col_marginal;
  bool converged = false;
  std::size_t iterations_used = 0;
  double objective = 0.0;
  std::vector<double> outer_objectives;  // solve_fused only, one per outer iterate
};

// Log-domain scaling for  min_T <C,T> + eps*reg  with the row marginal held
// exactly at mu and the column marginal penalized by lambda*KL(T^t 1 || nu):
//   f_i <- eps*(log mu_i - LSE_j((g_j - C_ij)/eps))
//   g_j <- lambda/(lambda+eps) * eps*(log nu_j - LSE_i((f_i - C_ij)/eps))
// Stops when the column marginal moves less than tol in max norm. A final f
// update before forming T makes the row constraint hold by construction.
Coupling solve_entropic_kot(const DenseMatrix& cost, const Marginals& marg, const OtConfig& cfg);

// Gradient (up to the factor 2 absorbed into alpha) of the product-loss GW
// objective sum_{ikjl} Cv_ik Ca_jl T_ij T_kl, i.e. G = c_rows * T * c_cols.
DenseMatrix gw_gradient(const DenseMatrix& t, const DenseMatrix& c_rows,
                        const DenseMatrix& c_cols);

// Same result through the band: O(n * m) with sliding-window prefix sums,
// never touching an n x n matrix.
DenseMatrix gw_gradient_banded(const DenseMatrix& t, std::size_t radius,
                               const DenseMatrix& c_cols);

// Fused solve by iterative linearization: T0 from the plain KOT cost, then
// outer_iters rounds of  C_lin = (1-alpha)*c_kot + alpha*gw_gradient(T)
// each re-solved with the entropic scaling above.
Coupling solve_fused(const cost::CostBundle& bundle, const Marginals& marg, const OtConfig& cfg);

// Per-row argmax with ties broken toward the lowest column index.
std::vector<int> decode_labels(const Coupling& coupling);

}  // namespace clot::ot
