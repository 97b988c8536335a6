#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "subspace/combination.hpp"
#include "subspace/errors.hpp"
#include "subspace/params.hpp"
#include "subspace/random.hpp"
#include "subspace/tuner.hpp"

using namespace subspace;

TEST_CASE("DoRA at initialization and after an update") {
  Rng rng(40);
  const Matrix w = rng.gaussian(6, 5);
  CombinationState s = init_combination(CombinationKind::DoRA, w, 2, rng);
  CHECK(max_abs_diff(dora_apply(s, w), w) <= 1e-12);

  s.b = rng.gaussian(2, 5);
  s.magnitude = rng.gaussian_vector(5);
  for (double& v : s.magnitude) v = std::abs(v) + 0.1;
  const Matrix out = dora_apply(s, w);
  const Vector norms = column_norms(out);
  for (std::size_t j = 0; j < 5; ++j) CHECK(norms[j] == doctest::Approx(s.magnitude[j]).epsilon(1e-12));

  // Direction of every column follows W + s·AB.
  const Matrix moved = w + s.scale * matmul(s.a, s.b);
  const Vector moved_norms = column_norms(moved);
  for (std::size_t j = 0; j < 5; ++j)
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(out(i, j) == doctest::Approx(s.magnitude[j] * moved(i, j) / moved_norms[j]).epsilon(1e-12));

  // Simplified form with dvec = magnitude / column norm.
  Vector dvec(5);
  for (std::size_t j = 0; j < 5; ++j) dvec[j] = s.magnitude[j] / moved_norms[j];
  CHECK(max_abs_diff(dora_simplified_apply(w, s.scale * s.a, s.b, dvec), out) <= 1e-12);
}

TEST_CASE("DoRA rejects degenerate columns and bad shapes") {
  Rng rng(41);
  Matrix w = rng.gaussian(4, 3);
  for (std::size_t i = 0; i < 4; ++i) w(i, 1) = 0.0;
  CombinationState s = init_combination(CombinationKind::DoRA, w, 1, rng);
  CHECK_THROWS_AS(dora_apply(s, w), DomainError);
  s.magnitude.pop_back();
  CHECK_THROWS_AS(dora_apply(s, w), ShapeError);
  CHECK_THROWS_AS(init_combination(CombinationKind::DoRA, w, 4, rng), ShapeError);
}

TEST_CASE("DoRA factors need not be semi-orthogonal") {
  // The update A·B is unconstrained, unlike the ADB family.
  Rng rng(42);
  const Matrix w = rng.gaussian(5, 5);
  CombinationState s = init_combination(CombinationKind::DoRA, w, 2, rng);
  s.b = rng.gaussian(2, 5);
  CHECK(max_abs_diff(matmul_nt(s.b, s.b), Matrix::identity(2)) > 0.1);
  CHECK(dora_apply(s, w).all_finite());
}

TEST_CASE("spectral adapter") {
  Rng rng(43);
  const Matrix w = rng.gaussian(6, 4);
  CombinationState s = init_combination(CombinationKind::SpectralAdapter, w, 2, rng);
  CHECK(max_abs_diff(spectral_adapter_apply(s, w), w) <= 1e-10);

  // r equal to the full rank with B = 0 gives W + A·Σ_r·Vᵀ.
  CombinationState full = init_combination(CombinationKind::SpectralAdapter, w, 4, rng);
  full.a = rng.gaussian(6, 4);
  const SvdFactors& f = *full.frozen;
  const Matrix sig = Matrix::diagonal(4, 4, f.sigma);
  const Matrix expect = w + matmul(matmul(full.a, sig), f.v.block(0, 0, 4, 4).transpose());
  CHECK(max_abs_diff(spectral_adapter_apply(full, w), expect) <= 1e-10);

  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.next() % 9, m = 2 + rng.next() % 9;
    const Matrix wt = rng.gaussian(n, m);
    const std::size_t r = 1 + rng.next() % std::min(n, m);
    CombinationState st = init_combination(CombinationKind::SpectralAdapter, wt, r, rng);
    st.a = rng.gaussian(n, r);
    st.b = rng.gaussian(m, r);
    REQUIRE(relative_error(spectral_adapter_apply(st, wt), spectral_adapter_expansion(st, wt)) <= 1e-10);
  }

  CombinationState missing = s;
  missing.frozen.reset();
  CHECK_THROWS_AS(spectral_adapter_apply(missing, w), DomainError);
  CHECK_THROWS_AS(spectral_adapter_apply(s, rng.gaussian(4, 6)), ShapeError);
}

TEST_CASE("SVDiff spectral shift") {
  Rng rng(44);
  const Matrix w = rng.gaussian(5, 7);
  CombinationState s = init_combination(CombinationKind::SVDiff, w, 0, rng);
  CHECK(s.shift.size() == 5);
  CHECK(max_abs_diff(svdiff_apply(s, w), w) <= 1e-10);

  const Vector sigma = s.frozen->sigma;
  for (std::size_t i = 0; i < sigma.size(); ++i) s.shift[i] = -2.0 * sigma[i];
  CHECK(max_abs(svdiff_apply(s, w)) == 0.0);

  for (int t = 0; t < 20; ++t) {
    for (double& v : s.shift) v = 2.0 * rng.normal();
    Vector expect(sigma.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) expect[i] = std::max(sigma[i] + s.shift[i], 0.0);
    std::sort(expect.begin(), expect.end(), std::greater<>());
    const Vector got = svd(svdiff_apply(s, w)).sigma;
    for (std::size_t i = 0; i < expect.size(); ++i) REQUIRE(std::abs(got[i] - expect[i]) <= 1e-10);
    REQUIRE(relative_error(svdiff_apply(s, w), svdiff_expansion(s, w)) <= 1e-10);
  }

  CHECK(spectral_shift_operator(Vector{3, 1}, Vector{-5, 0.5}) == Vector{-3, 0.5});
  CHECK_THROWS_AS(spectral_shift_operator(Vector{3, 1}, Vector{0}), ShapeError);
  s.shift.pop_back();
  CHECK_THROWS_AS(svdiff_apply(s, w), ShapeError);
}

TEST_CASE("fresh combination tuners leave W unchanged") {
  Rng rng(45);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 1 + rng.next() % 10, m = 1 + rng.next() % 10;
    const Matrix w = rng.gaussian(n, m);
    const std::size_t r = 1 + rng.next() % std::min(n, m);
    for (CombinationKind k : {CombinationKind::DoRA, CombinationKind::SpectralAdapter, CombinationKind::SVDiff}) {
      REQUIRE(max_abs_diff(apply(init_combination(k, w, r, rng), w), w) <= 1e-10);
    }
  }
}

TEST_CASE("combination trainable counts") {
  Rng rng(46);
  const Matrix w = rng.gaussian(6, 9);
  TunerOptions opts;
  opts.rank = 3;
  for (Method m : {Method::DoRA, Method::Spectral, Method::SVDiff}) {
    CHECK(trainable_count(make_tuner(m, w, Vector(9, 0.0), opts, rng)) == count_params(m, {6, 9}, 3));
  }
  CHECK(count_params(Method::DoRA, {6, 9}, 3) == 3 * 15 + 9);
  CHECK(count_params(Method::Spectral, {6, 9}, 3) == 3 * 15);
  CHECK(count_params(Method::SVDiff, {6, 9}, 3) == 6);
}
