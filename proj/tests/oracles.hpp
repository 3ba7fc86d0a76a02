#pragma once

// Test-only oracles, kept independent of the solver implementation paths
// they check.

#include <functional>
#include <limits>
#include <vector>

#include "clot/matrix.hpp"

namespace oracles {

// Exact optimum of  min <C,T>  over the transport polytope with uniform
// marginals mu = 1/n, nu = 1/m, by exhaustive dynamic programming over
// integer-scaled tables (unit = 1 / lcm(n, m) of mass; the constraint matrix
// is totally unimodular, so the LP optimum is attained at an integer table).
inline double lp_transport_optimum_uniform(const clot::DenseMatrix& cost) {
  const std::size_t n = cost.rows, m = cost.cols;
  auto gcd = [](std::size_t a, std::size_t b) {
    while (b) {
      const std::size_t t = a % b;
      a = b;
      b = t;
    }
    return a;
  };
  const std::size_t total = n * m / gcd(n, m);  // lcm: total units of mass
  const std::size_t row_units = total / n;
  const std::size_t col_units = total / m;
  const double unit = 1.0 / static_cast<double>(total);

  // State: remaining column capacities, base (col_units + 1).
  const std::size_t base = col_units + 1;
  std::size_t n_states = 1;
  for (std::size_t j = 0; j < m; ++j) n_states *= base;

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dp(n_states, inf);
  std::size_t full = 0;
  for (std::size_t j = 0; j < m; ++j) full = full * base + col_units;
  dp[full] = 0.0;

  std::vector<std::size_t> remaining(m), chosen(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> next(n_states, inf);
    for (std::size_t s = 0; s < n_states; ++s) {
      if (dp[s] == inf) continue;
      std::size_t acc = s;
      for (std::size_t j = m; j-- > 0;) {
        remaining[j] = acc % base;
        acc /= base;
      }
      // Enumerate row splits x_0..x_{m-1} >= 0 summing to row_units.
      std::function<void(std::size_t, std::size_t, double)> rec =
          [&](std::size_t j, std::size_t left, double add) {
            if (j + 1 == m) {
              if (left > remaining[j]) return;
              chosen[j] = left;
              std::size_t ns = 0;
              for (std::size_t q = 0; q < m; ++q) ns = ns * base + (remaining[q] - chosen[q]);
              const double c =
                  dp[s] + add + static_cast<double>(left) * unit * cost(i, j);
              if (c < next[ns]) next[ns] = c;
              return;
            }
            const std::size_t cap = remaining[j] < left ? remaining[j] : left;
            for (std::size_t x = 0; x <= cap; ++x) {
              chosen[j] = x;
              rec(j + 1, left - x, add + static_cast<double>(x) * unit * cost(i, j));
            }
          };
      rec(0, row_units, 0.0);
    }
    dp.swap(next);
  }
  return dp[0];
}

// Gradient of the product-loss GW objective by the literal quadruple sum.
inline clot::DenseMatrix gw_gradient_quadruple(const clot::DenseMatrix& t,
                                               const clot::DenseMatrix& c_rows,
                                               const clot::DenseMatrix& c_cols) {
  const std::size_t n = t.rows, m = t.cols;
  clot::DenseMatrix g(n, m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < m; ++l) acc += c_rows(i, k) * c_cols(j, l) * t(k, l);
      g(i, j) = acc;
    }
  return g;
}

}  // namespace oracles
