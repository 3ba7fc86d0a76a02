#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "clot/ot/solver.hpp"
#include "clot/pipeline/pipeline.hpp"
#include "clot/rng.hpp"
#include "oracles.hpp"

using clot::DenseMatrix;
using clot::Rng;
namespace ot = clot::ot;
namespace cost = clot::cost;

namespace {

DenseMatrix random_cost(std::size_t n, std::size_t m, Rng& rng, double scale = 1.0) {
  DenseMatrix c(n, m);
  for (auto& v : c.data) v = rng.uniform() * scale;
  return c;
}

double dot_all(const DenseMatrix& a, const DenseMatrix& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data[i] * b.data[i];
  return acc;
}

}  // namespace

TEST_CASE("constant cost, huge lambda: uniform coupling") {
  ot::OtConfig cfg;
  cfg.epsilon = 0.1;
  cfg.lambda = 1e6;
  cfg.inner_iters = 2000;
  cfg.tol = 1e-12;
  const DenseMatrix c(4, 3, 0.7);
  const auto marg = ot::Marginals::uniform(4, 3);
  const auto coupling = ot::solve_entropic_kot(c, marg, cfg);
  CHECK(coupling.converged);
  for (double v : coupling.t.data) CHECK(std::fabs(v - 1.0 / 12.0) <= 1e-6);
}

TEST_CASE("antidiagonal 2x2 cost concentrates on the diagonal") {
  ot::OtConfig cfg;
  cfg.epsilon = 0.05;
  cfg.lambda = 1e6;
  cfg.inner_iters = 5000;
  cfg.tol = 1e-12;
  const DenseMatrix c = DenseMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
  const auto coupling = ot::solve_entropic_kot(c, ot::Marginals::uniform(2, 2), cfg);
  CHECK(coupling.t(0, 0) > 0.45);
  CHECK(coupling.t(1, 1) > 0.45);
}

TEST_CASE("row marginal feasibility on random instances") {
  Rng rng(17);
  ot::OtConfig cfg;
  for (int rep = 0; rep < 20; ++rep) {
    const auto c = random_cost(10, 5, rng);
    const auto marg = ot::Marginals::uniform(10, 5);
    const auto coupling = ot::solve_entropic_kot(c, marg, cfg);
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(std::fabs(coupling.row_marginal[i] - marg.mu[i]) <= 1e-9);
    for (double v : coupling.t.data) CHECK(v >= 0.0);
  }
}

TEST_CASE("epsilon -> 0 recovers the exact LP optimum within 1%") {
  Rng rng(2024);
  const auto c = random_cost(5, 4, rng);
  const double lp = oracles::lp_transport_optimum_uniform(c);

  ot::OtConfig cfg;
  cfg.epsilon = 1e-3;
  cfg.lambda = 1e6;
  cfg.inner_iters = 20000;
  cfg.tol = 1e-6;
  const auto coupling = ot::solve_entropic_kot(c, ot::Marginals::uniform(5, 4), cfg);
  CHECK(coupling.converged);
  const double transport_cost = dot_all(c, coupling.t);
  CHECK(std::fabs(transport_cost - lp) <= 0.01 * std::fabs(lp));
}

TEST_CASE("column feasibility error decreases along a lambda grid") {
  Rng rng(31);
  const auto c = random_cost(8, 4, rng);
  const auto marg = ot::Marginals::uniform(8, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 1e6}) {
    ot::OtConfig cfg;
    cfg.lambda = lambda;
    cfg.inner_iters = 5000;
    cfg.tol = 1e-9;
    const auto coupling = ot::solve_entropic_kot(c, marg, cfg);
    double err = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
      err = std::max(err, std::fabs(coupling.col_marginal[j] - marg.nu[j]));
    CHECK(err <= prev + 1e-12);
    prev = err;
  }
  CHECK(prev <= 1e-6);  // balanced limit
}

TEST_CASE("column permutation equivariance") {
  Rng rng(12);
  const auto c = random_cost(7, 4, rng);
  ot::OtConfig cfg;
  cfg.inner_iters = 3000;
  cfg.tol = 1e-12;
  const auto marg = ot::Marginals::uniform(7, 4);
  const auto base = ot::solve_entropic_kot(c, marg, cfg);

  const std::vector<std::size_t> perm{2, 0, 3, 1};
  DenseMatrix shuffled(7, 4);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) shuffled(i, perm[j]) = c(i, j);
  const auto moved = ot::solve_entropic_kot(shuffled, marg, cfg);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(moved.t(i, perm[j]) == doctest::Approx(base.t(i, j)).epsilon(1e-9));

  // hence decode_labels is equivariant under the same relabeling
  const auto base_labels = ot::decode_labels(base);
  const auto moved_labels = ot::decode_labels(moved);
  for (std::size_t i = 0; i < base_labels.size(); ++i)
    CHECK(moved_labels[i] == static_cast<int>(perm[static_cast<std::size_t>(base_labels[i])]));
}

TEST_CASE("gw_gradient: 2x2 hand value and the quadruple-sum oracle") {
  const DenseMatrix anti = DenseMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
  const DenseMatrix t_half = DenseMatrix::from_rows({{0.5, 0.0}, {0.0, 0.5}});
  const auto hand = ot::gw_gradient(t_half, anti, anti);
  CHECK(hand(0, 0) == doctest::Approx(0.5));
  CHECK(hand(0, 1) == doctest::Approx(0.0));
  CHECK(hand(1, 0) == doctest::Approx(0.0));
  CHECK(hand(1, 1) == doctest::Approx(0.5));

  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.uniform_below(5);  // up to 6
    const std::size_t m = 2 + rng.uniform_below(5);
    const std::size_t radius = 1 + rng.uniform_below(n - 1);
    const auto bundle = cost::make_bundle_radius(random_cost(n, m, rng), radius);
    DenseMatrix t(n, m);
    for (auto& v : t.data) v = rng.uniform();

    const auto direct = ot::gw_gradient(t, bundle.c_rows, bundle.c_cols);
    const auto oracle = oracles::gw_gradient_quadruple(t, bundle.c_rows, bundle.c_cols);
    const auto banded = ot::gw_gradient_banded(t, radius, bundle.c_cols);
    for (std::size_t i = 0; i < direct.size(); ++i) {
      CHECK(std::fabs(direct.data[i] - oracle.data[i]) <= 1e-12);
      CHECK(std::fabs(banded.data[i] - oracle.data[i]) <= 1e-12);
    }
  }

  // uniform T on 3x2 with the radius-1 chain
  const auto chain = cost::make_bundle_radius(DenseMatrix(3, 2, 0.0), 1);
  const DenseMatrix t_uniform(3, 2, 1.0 / 6.0);
  const auto got = ot::gw_gradient(t_uniform, chain.c_rows, chain.c_cols);
  const auto want = oracles::gw_gradient_quadruple(t_uniform, chain.c_rows, chain.c_cols);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::fabs(got.data[i] - want.data[i]) <= 1e-12);

  // zero structure -> zero gradient
  const auto zero = ot::gw_gradient(t_uniform, DenseMatrix(3, 3, 0.0), chain.c_cols);
  for (double v : zero.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(ot::gw_gradient(t_uniform, DenseMatrix(2, 3, 0.0), chain.c_cols),
                  clot::DimensionError);
}

TEST_CASE("solve_fused with alpha 0 equals the plain entropic solve") {
  Rng rng(5);
  const auto bundle = cost::make_bundle(random_cost(9, 4, rng), 0.25);
  const auto marg = ot::Marginals::uniform(9, 4);
  ot::OtConfig cfg;
  cfg.alpha = 0.0;
  const auto fused = ot::solve_fused(bundle, marg, cfg);
  const auto plain = ot::solve_entropic_kot(bundle.c_kot, marg, cfg);
  for (std::size_t i = 0; i < fused.t.size(); ++i)
    CHECK(std::fabs(fused.t.data[i] - plain.t.data[i]) <= 1e-10);
}

TEST_CASE("fused objective is non-increasing across outer iterations") {
  Rng rng(404);
  for (int rep = 0; rep < 10; ++rep) {
    const auto bundle = cost::make_bundle(random_cost(20, 4, rng), 0.1);
    ot::OtConfig cfg;
    cfg.alpha = 0.5;
    cfg.inner_iters = 2000;
    cfg.tol = 1e-10;
    const auto coupling = ot::solve_fused(bundle, ot::Marginals::uniform(20, 4), cfg);
    REQUIRE(coupling.outer_objectives.size() == cfg.outer_iters + 1);
    for (std::size_t i = 1; i < coupling.outer_objectives.size(); ++i) {
      CHECK(coupling.outer_objectives[i] <=
            coupling.outer_objectives[i - 1] +
                1e-9 * std::max(1.0, std::fabs(coupling.outer_objectives[i - 1])));
    }
  }
}

TEST_CASE("temporal consistency: alpha smooths the committed noisy block instance") {
  // 40 frames in three blocks (14/13/13) with seeded uniform noise strong
  // enough to fragment the alpha = 0 decode.
  const std::size_t n = 40, k = 3;
  Rng rng(20240617);
  DenseMatrix c(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t truth = i < 14 ? 0 : (i < 27 ? 1 : 2);
    for (std::size_t j = 0; j < k; ++j)
      c(i, j) = (j == truth ? 0.25 : 0.75) + 0.9 * rng.uniform();
  }
  const auto marg = ot::Marginals::uniform(n, k);

  ot::OtConfig plain;
  plain.alpha = 0.0;
  plain.epsilon = 0.07;
  plain.lambda = 1.0;
  plain.inner_iters = 2000;
  const auto bundle = cost::make_bundle_radius(c, 2);

  const auto t0 = ot::solve_fused(bundle, marg, plain);
  ot::OtConfig smooth = plain;
  smooth.alpha = 0.6;
  const auto t6 = ot::solve_fused(bundle, marg, smooth);

  const auto segments0 = clot::pipeline::run_length_encode(ot::decode_labels(t0));
  const auto segments6 = clot::pipeline::run_length_encode(ot::decode_labels(t6));
  CHECK(segments0.size() >= 4);  // the designed noise fragments the plain decode
  CHECK(segments6.size() <= segments0.size());
}

TEST_CASE("large instances run on the band alone, no dense n x n") {
  // Above the dense limit the bundle only carries the radius; the fused
  // solve and decode must work off it and stay block-consistent.
  const std::size_t n = 3000, k = 3;
  Rng rng(61);
  DenseMatrix c(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t truth = i * k / n;
    for (std::size_t j = 0; j < k; ++j)
      c(i, j) = (j == truth ? 0.1 : 0.9) + 0.2 * rng.uniform();
  }
  const auto bundle = cost::make_bundle(c, 0.04);
  REQUIRE(!bundle.has_dense_rows());
  ot::OtConfig cfg;
  cfg.inner_iters = 300;
  const auto coupling = ot::solve_fused(bundle, ot::Marginals::uniform(n, k), cfg);
  const auto labels = ot::decode_labels(coupling);
  REQUIRE(labels.size() == n);
  const auto segments = clot::pipeline::run_length_encode(labels);
  CHECK(segments.size() <= 6);  // three separable blocks, mild noise
  for (std::size_t i = 0; i < n; ++i)
    CHECK(std::fabs(coupling.row_marginal[i] - 1.0 / static_cast<double>(n)) <= 1e-9);
}

TEST_CASE("decode_labels tie-breaking and argmax") {
  ot::Coupling c;
  c.t = DenseMatrix::from_rows({{0.2, 0.2, 0.6}, {0.5, 0.5, 0.0}, {0.1, 0.05, 0.02}});
  const auto labels = ot::decode_labels(c);
  CHECK(labels[0] == 2);
  CHECK(labels[1] == 0);  // exact tie -> lowest column index
  CHECK(labels[2] == 0);
}

TEST_CASE("solver rejects bad inputs and reports non-convergence") {
  ot::OtConfig cfg;
  DenseMatrix bad(2, 2, 0.0);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ot::solve_entropic_kot(bad, ot::Marginals::uniform(2, 2), cfg),
                  clot::InputError);

  cfg.alpha = 2.0;
  CHECK_THROWS_AS(ot::validate(cfg), clot::ParamError);
  cfg.alpha = 0.4;
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(ot::validate(cfg), clot::ParamError);

  // one iteration of a hard instance: reported, not thrown
  ot::OtConfig tight;
  tight.inner_iters = 1;
  tight.tol = 1e-14;
  Rng rng(3);
  const auto coupling =
      ot::solve_entropic_kot(random_cost(6, 3, rng), ot::Marginals::uniform(6, 3), tight);
  CHECK(!coupling.converged);
  CHECK(coupling.iterations_used >= 1);
  // even unconverged, the hard row constraint holds by construction
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(std::fabs(coupling.row_marginal[i] - 1.0 / 6.0) <= 1e-9);
}
