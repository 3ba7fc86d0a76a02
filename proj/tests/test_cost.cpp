#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "clot/cost/cost.hpp"
#include "clot/rng.hpp"

using clot::DenseMatrix;
using clot::Rng;
namespace cost = clot::cost;
namespace swd = clot::swd;

TEST_CASE("temporal_prior pinned values") {
  const auto z22 = cost::temporal_prior(2, 2);
  CHECK(z22(0, 0) == doctest::Approx(0.0));
  CHECK(z22(0, 1) == doctest::Approx(0.5));
  CHECK(z22(1, 0) == doctest::Approx(0.5));
  CHECK(z22(1, 1) == doctest::Approx(0.0));

  const auto z42 = cost::temporal_prior(4, 2);
  CHECK(z42(0, 1) == doctest::Approx(0.75));  // |1/4 - 1|

  const auto square = cost::temporal_prior(5, 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(square(i, i) == doctest::Approx(0.0));
  for (double v : square.data) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(cost::temporal_prior(0, 2), clot::ParamError);
}

TEST_CASE("structure_matrices pinned shapes and 0/1 symmetry") {
  const auto [rows3, cols2] = cost::structure_matrices(3, 2, 1.0 / 3.0);
  const DenseMatrix expect_rows = DenseMatrix::from_rows({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
  CHECK(rows3.data == expect_rows.data);
  const DenseMatrix expect_cols = DenseMatrix::from_rows({{0, 1}, {1, 0}});
  CHECK(cols2.data == expect_cols.data);

  // Breakfast-style fraction: ceil(0.04 * 256) = 11.
  CHECK(cost::band_radius(256, 0.04) == 11);
  CHECK(cost::band_radius(10, 1.0) == 9);  // clamped to n-1

  Rng rng(3);
  const std::size_t n = 9, k = 4;
  const auto [cr, cc] = cost::structure_matrices(n, k, 0.3);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(cr(i, i) == 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK((cr(i, j) == 0.0 || cr(i, j) == 1.0));
      CHECK(cr(i, j) == cr(j, i));
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    CHECK(cc(i, i) == 0.0);
    for (std::size_t j = 0; j < k; ++j) CHECK(cc(i, j) == (i == j ? 0.0 : 1.0));
  }
  CHECK_THROWS_AS(cost::structure_matrices(3, 2, 0.0), clot::ParamError);
  CHECK_THROWS_AS(cost::structure_matrices(3, 2, -0.5), clot::ParamError);
}

TEST_CASE("frame_kot_cost: perfect match zero, orthogonal 1 + swd") {
  swd::ProjectionSet axes;
  axes.p_factor = 1;
  axes.directions = DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});

  const DenseMatrix unit = DenseMatrix::from_rows({{1.0, 0.0}});
  const auto zero = cost::frame_kot_cost(unit, unit, 0.0, axes);
  CHECK(zero(0, 0) == doctest::Approx(0.0).epsilon(1e-12));

  const DenseMatrix other = DenseMatrix::from_rows({{0.0, 1.0}});
  const auto orth = cost::frame_kot_cost(unit, other, 0.0, axes);
  // cos = 0, swd = 1 with these axes -> 1 + 1.
  CHECK(orth(0, 0) == doctest::Approx(2.0).epsilon(1e-12));

  for (double v : orth.data) CHECK(v >= 0.0);
}

TEST_CASE("frame_kot_cost: rho strictly increases prior-weighted entries") {
  Rng rng(8);
  const std::size_t n = 6, k = 3, d = 5;
  DenseMatrix x(n, d), a(k, d);
  for (auto& v : x.data) v = rng.normal();
  for (auto& v : a.data) v = rng.normal();
  Rng prng(2);
  const auto proj = swd::sample_projections(d, 2, prng);

  const auto c0 = cost::frame_kot_cost(x, a, 0.0, proj);
  const auto c1 = cost::frame_kot_cost(x, a, 0.2, proj);
  const auto z = cost::temporal_prior(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (z(i, j) > 0.0) CHECK(c1(i, j) > c0(i, j));
      else CHECK(c1(i, j) == doctest::Approx(c0(i, j)));
    }
}

TEST_CASE("frame_kot_cost row minimum lands on the matched column") {
  // Aligned unit rows: x_i = a_i, rho = 0.
  const DenseMatrix basis = DenseMatrix::from_rows(
      {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  Rng prng(5);
  const auto proj = swd::sample_projections(3, 4, prng);
  const auto c = cost::frame_kot_cost(basis, basis, 0.0, proj);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) CHECK(c(i, i) < c(i, j));
  }
}

TEST_CASE("segment_kot_cost basics") {
  const DenseMatrix s = DenseMatrix::from_rows({{1.0, 0.0}});
  const auto zero = cost::segment_kot_cost(s, s, 0.0);
  CHECK(zero(0, 0) == doctest::Approx(0.0));

  const auto orth = cost::segment_kot_cost(s, DenseMatrix::from_rows({{0.0, 1.0}}), 0.0);
  CHECK(orth(0, 0) == doctest::Approx(1.0));

  // K' = K: diagonal prior is zero, so cost = 1 - cos regardless of rho_s.
  const DenseMatrix sq =
      DenseMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto with_prior = cost::segment_kot_cost(sq, sq, 0.7);
  CHECK(with_prior(0, 0) == doctest::Approx(0.0));
  CHECK(with_prior(1, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cost::segment_kot_cost(DenseMatrix(2, 3), DenseMatrix(2, 4), 0.1),
                  clot::DimensionError);
}

TEST_CASE("refined_kot_cost: with and without the swd term") {
  Rng rng(10);
  const std::size_t n = 4, k = 2, d = 6;
  DenseMatrix f(n, d), a(k, d);
  for (auto& v : f.data) v = rng.normal();
  for (auto& v : a.data) v = rng.normal();
  Rng prng(11);
  const auto proj = swd::sample_projections(d, 2, prng);

  const auto plain = cost::refined_kot_cost(f, a, 0.1, nullptr);
  const auto with_swd = cost::refined_kot_cost(f, a, 0.1, &proj);
  const auto sw = swd::swd_matrix(f, a, proj, 1);
  for (std::size_t i = 0; i < plain.size(); ++i)
    CHECK(with_swd.data[i] == doctest::Approx(plain.data[i] + sw.data[i]).epsilon(1e-12));

  // Matched rows at rho 0 without swd -> exactly 0.
  const auto matched = cost::refined_kot_cost(a, a, 0.0, nullptr);
  CHECK(matched(0, 0) == doctest::Approx(0.0));
  CHECK(matched(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("make_bundle: dense band when small, radius only when large") {
  DenseMatrix c(10, 3, 1.0);
  const auto small = cost::make_bundle(c, 0.2);
  CHECK(small.has_dense_rows());
  CHECK(small.row_band_radius == 2);
  CHECK(small.c_rows.rows == 10);
  CHECK(small.c_cols.rows == 3);
  for (std::size_t j = 0; j < 3; ++j) CHECK(small.c_cols(j, j) == 0.0);

  const auto large = cost::make_bundle(DenseMatrix(5000, 3, 1.0), 0.01);
  CHECK(!large.has_dense_rows());
  CHECK(large.row_band_radius == 50);
}
