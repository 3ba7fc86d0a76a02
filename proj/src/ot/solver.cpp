#include "clot/ot/solver.hpp"

#include <cmath>
#include <limits>

#include "clot/kernels/kernels.hpp"
#include "clot/reduce.hpp"

namespace clot::ot {

void validate(const OtConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ParamError("OtConfig: alpha must be in [0,1]");
  if (!(cfg.epsilon > 0.0)) throw ParamError("OtConfig: epsilon must be positive");
  if (!(cfg.lambda > 0.0)) throw ParamError("OtConfig: lambda must be positive");
  if (cfg.inner_iters < 1) throw ParamError("OtConfig: inner_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw ParamError("OtConfig: tol must be positive");
}

Marginals Marginals::uniform(std::size_t n, std::size_t m) {
  if (n < 1 || m < 1) throw ParamError("Marginals: sizes must be >= 1");
  Marginals marg;
  marg.mu.assign(n, 1.0 / static_cast<double>(n));
  marg.nu.assign(m, 1.0 / static_cast<double>(m));
  return marg;
}

namespace {

double lse_vector(const double* x, std::size_t n) {
  const auto& k = kernels::ops();
  const double mx = k.max(x, n);
  return mx + std::log(k.sum_exp_shift(x, n, mx));
}

}  // namespace

Coupling solve_entropic_kot(const DenseMatrix& cost, const Marginals& marg, const OtConfig& cfg) {
  validate(cfg);
  require_nonempty(cost, "solve_entropic_kot");
  if (!all_finite(cost)) throw InputError("solve_entropic_kot: cost has non-finite entries");
  const std::size_t n = cost.rows, m = cost.cols;
  if (marg.mu.size() != n || marg.nu.size() != m)
    throw DimensionError("solve_entropic_kot: marginal lengths disagree with cost");
  for (double v : marg.mu)
    if (!(v > 0.0)) throw ParamError("solve_entropic_kot: mu entries must be positive");
  for (double v : marg.nu)
    if (!(v > 0.0)) throw ParamError("solve_entropic_kot: nu entries must be positive");

  std::vector<double> log_mu(n), log_nu(m);
  for (std::size_t i = 0; i < n; ++i) log_mu[i] = std::log(marg.mu[i]);
  for (std::size_t j = 0; j < m; ++j) log_nu[j] = std::log(marg.nu[j]);

  const DenseMatrix cost_t = transposed(cost);  // column passes walk rows of this

  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> scratch(std::max(n, m));
  std::vector<double> col_marg(m, 0.0);

  // Epsilon scaling: warm-start the duals from coarser regularization so the
  // pinned updates keep making progress at small target epsilon (plain
  // scaling iterations stall there). The returned coupling always comes from
  // iterations at the target epsilon.
  std::vector<double> schedule{cfg.epsilon};
  for (double e = cfg.epsilon; e < 1.0 && schedule.size() < 24;) {
    e *= 2.0;
    schedule.push_back(std::min(e, 1.0));
  }

  bool converged = false;
  std::size_t total_iters = 0;

  for (std::size_t stage = schedule.size(); stage-- > 0;) {
    const double eps = schedule[stage];
    const double inv_eps = 1.0 / eps;
    const double kappa = cfg.lambda / (cfg.lambda + eps);
    const bool final_stage = stage == 0;
    // Coarse stages only warm-start; the configured budget is for the target.
    const std::size_t budget = final_stage ? cfg.inner_iters : std::min<std::size_t>(
                                                 cfg.inner_iters, 60);
    const double stage_tol = final_stage ? cfg.tol : std::max(cfg.tol, 1e-4);

    std::size_t iter = 0;
    while (iter < budget) {
      ++iter;
      for (std::size_t i = 0; i < n; ++i) {
        const double* crow = cost.row(i);
        for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - crow[j]) * inv_eps;
        f[i] = eps * (log_mu[i] - lse_vector(scratch.data(), m));
      }
      // Feasibility gap of the row-feasible iterate before the g update:
      // |T^t 1 - nu_j exp(-g_j/lambda)| with the current (stale) g. Zero at
      // the joint fixed point; for large lambda this is |T^t 1 - nu|.
      double residual = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double* ccol = cost_t.row(j);
        for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - ccol[i]) * inv_eps;
        const double s = lse_vector(scratch.data(), n);
        col_marg[j] = std::exp(g[j] * inv_eps + s);
        const double target = marg.nu[j] * std::exp(-g[j] / cfg.lambda);
        residual = std::max(residual, std::fabs(col_marg[j] - target));
        g[j] = kappa * eps * (log_nu[j] - s);
      }
      if (residual < stage_tol) {
        converged = final_stage;
        break;
      }
    }
    total_iters += iter;
  }

  // Final f update: rows meet mu exactly, by construction.
  const double eps = cfg.epsilon;
  const double inv_eps = 1.0 / eps;
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = cost.row(i);
    for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - crow[j]) * inv_eps;
    f[i] = eps * (log_mu[i] - lse_vector(scratch.data(), m));
  }

  Coupling c;
  c.t = DenseMatrix(n, m);
  c.row_marginal.assign(n, 0.0);
  c.col_marginal.assign(m, 0.0);
  double linear = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* crow = cost.row(i);
    double* trow = c.t.row(i);
    for (std::size_t j = 0; j < m; ++j) scratch[j] = (f[i] + g[j] - crow[j]) * inv_eps;
    c.row_marginal[i] = kernels::ops().exp_shift_store(scratch.data(), trow, m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      c.col_marginal[j] += trow[j];
      linear += trow[j] * crow[j];
    }
  }
  ensure_finite(c.t, "solve_entropic_kot coupling");
  c.converged = converged;
  c.iterations_used = total_iters;
  c.objective = linear + cfg.lambda * kl_divergence(c.col_marginal, marg.nu);
  return c;
}

DenseMatrix gw_gradient(const DenseMatrix& t, const DenseMatrix& c_rows,
                        const DenseMatrix& c_cols) {
  if (c_rows.rows != c_rows.cols || c_rows.rows != t.rows)
    throw DimensionError("gw_gradient: c_rows must be n x n");
  if (c_cols.rows != c_cols.cols || c_cols.rows != t.cols)
    throw DimensionError("gw_gradient: c_cols must be m x m");
  return matmul(c_rows, matmul(t, c_cols));
}

DenseMatrix gw_gradient_banded(const DenseMatrix& t, std::size_t radius,
                               const DenseMatrix& c_cols) {
  if (c_cols.rows != c_cols.cols || c_cols.rows != t.cols)
    throw DimensionError("gw_gradient_banded: c_cols must be m x m");
  const std::size_t n = t.rows, m = t.cols;
  const DenseMatrix u = matmul(t, c_cols);

  // prefix[k] = sum of the first k rows of u; the band sum is a window diff.
  DenseMatrix prefix(n + 1, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* urow = u.row(i);
    const double* prev = prefix.row(i);
    double* next = prefix.row(i + 1);
    for (std::size_t j = 0; j < m; ++j) next[j] = prev[j] + urow[j];
  }
  DenseMatrix gmat(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > radius ? i - radius : 0;
    const std::size_t hi = std::min(n - 1, i + radius);
    const double* plo = prefix.row(lo);
    const double* phi = prefix.row(hi + 1);
    const double* urow = u.row(i);
    double* grow = gmat.row(i);
    for (std::size_t j = 0; j < m; ++j) grow[j] = phi[j] - plo[j] - urow[j];
  }
  return gmat;
}

namespace {

// The variational objective the outer loop descends. The gradient step uses
// G = c_rows T c_cols (the factor 2 of the quadratic form is absorbed into
// alpha), so the matching quadratic term carries weight alpha/2; the entropic
// term is the one the inner solve minimizes. Recorded per outer iterate; the
// plain linear+GW+KL value is not monotone under the linearization.
double fused_objective(const cost::CostBundle& bundle, const Coupling& c, const Marginals& marg,
                       const OtConfig& cfg) {
  const auto& k = kernels::ops();
  const double linear = k.dot(bundle.c_kot.data.data(), c.t.data.data(), c.t.size());
  DenseMatrix grad = bundle.has_dense_rows()
                         ? gw_gradient(c.t, bundle.c_rows, bundle.c_cols)
                         : gw_gradient_banded(c.t, bundle.row_band_radius, bundle.c_cols);
  const double gw = k.dot(grad.data.data(), c.t.data.data(), c.t.size());
  double entropic = 0.0;
  for (double t : c.t.data)
    if (t > 0.0) entropic += t * (std::log(t) - 1.0);
  const double kl = kl_divergence(c.col_marginal, marg.nu);
  return 0.5 * cfg.alpha * gw + (1.0 - cfg.alpha) * linear + cfg.epsilon * entropic +
         cfg.lambda * kl;
}

}  // namespace

Coupling solve_fused(const cost::CostBundle& bundle, const Marginals& marg, const OtConfig& cfg) {
  validate(cfg);
  Coupling c = solve_entropic_kot(bundle.c_kot, marg, cfg);
  std::size_t total_iters = c.iterations_used;
  std::vector<double> trace{fused_objective(bundle, c, marg, cfg)};

  if (cfg.alpha > 0.0) {
    DenseMatrix c_lin(bundle.c_kot.rows, bundle.c_kot.cols);
    for (std::size_t outer = 0; outer < cfg.outer_iters; ++outer) {
      const DenseMatrix grad =
          bundle.has_dense_rows()
              ? gw_gradient(c.t, bundle.c_rows, bundle.c_cols)
              : gw_gradient_banded(c.t, bundle.row_band_radius, bundle.c_cols);
      for (std::size_t idx = 0; idx < c_lin.size(); ++idx)
        c_lin.data[idx] = (1.0 - cfg.alpha) * bundle.c_kot.data[idx] + cfg.alpha * grad.data[idx];
      c = solve_entropic_kot(c_lin, marg, cfg);
      total_iters += c.iterations_used;
      trace.push_back(fused_objective(bundle, c, marg, cfg));
    }
  }
  c.iterations_used = total_iters;
  c.outer_objectives = std::move(trace);
  c.objective = c.outer_objectives.back();
  return c;
}

std::vector<int> decode_labels(const Coupling& coupling) {
  require_nonempty(coupling.t, "decode_labels");
  std::vector<int> labels(coupling.t.rows, 0);
  for (std::size_t i = 0; i < coupling.t.rows; ++i) {
    const double* row = coupling.t.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < coupling.t.cols; ++j)
      if (row[j] > row[best]) best = j;
    labels[i] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace clot::ot
