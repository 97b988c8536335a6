#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "subspace/errors.hpp"
#include "subspace/extension.hpp"
#include "subspace/svd.hpp"

using namespace subspace;

namespace {

constexpr ExtensionKind kAllKinds[] = {ExtensionKind::LoRA, ExtensionKind::ADB, ExtensionKind::AGB,
                                       ExtensionKind::SerialAdapter, ExtensionKind::ParallelAdapter};

Matrix relu_entrywise(Matrix m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
  return m;
}

ExtensionState random_state(ExtensionKind kind, std::size_t n, std::size_t m, std::size_t r, Rng& rng) {
  ExtensionState s = init_extension(kind, n, m, r, rng);
  s.a = rng.gaussian(s.a.rows(), s.a.cols());
  s.b = rng.gaussian(r, m);
  if (kind == ExtensionKind::ADB) s.d = rng.gaussian_vector(r);
  if (kind == ExtensionKind::AGB) s.g = rng.gaussian(r, r);
  return s;
}

}  // namespace

TEST_CASE("fresh state has zero delta and leaves W bit-identical") {
  Rng rng(10);
  const Matrix w = rng.gaussian(6, 5);
  for (ExtensionKind kind : kAllKinds) {
    const ExtensionState s = init_extension(kind, 6, 5, 3, rng);
    CHECK(max_abs(delta(s, w)) == 0.0);
    CHECK(apply(s, w) == w);
    CHECK(s.rank() == 3);
  }
}

TEST_CASE("initialization") {
  Rng rng(11);
  const ExtensionState s = init_extension(ExtensionKind::AGB, 200, 100, 8, rng);
  CHECK(s.a.rows() == 200);
  CHECK(s.a.cols() == 8);
  CHECK(max_abs(s.b) == 0.0);
  CHECK(s.g == Matrix::identity(8));
  double ss = 0.0;
  for (double v : s.a.values()) ss += v * v;
  CHECK(std::sqrt(ss / static_cast<double>(s.a.size())) == doctest::Approx(0.02).epsilon(0.05));

  const ExtensionState adb = init_extension(ExtensionKind::ADB, 4, 4, 2, rng);
  CHECK(adb.d == Vector{1.0, 1.0});
  CHECK(init_extension(ExtensionKind::SerialAdapter, 7, 5, 2, rng).a.rows() == 5);

  CHECK_THROWS_AS(init_extension(ExtensionKind::LoRA, 4, 3, 0, rng), ShapeError);
  CHECK_THROWS_AS(init_extension(ExtensionKind::LoRA, 4, 3, 4, rng), ShapeError);
}

TEST_CASE("delta examples") {
  ExtensionState s;
  s.kind = ExtensionKind::LoRA;
  s.a = Matrix(4, 1);
  s.a(0, 0) = 1.0;
  s.b = Matrix(1, 3);
  s.b(0, 0) = 1.0;
  Matrix e11(4, 3);
  e11(0, 0) = 1.0;
  CHECK(delta(s) == e11);

  Rng rng(12);
  const ExtensionState agb = random_state(ExtensionKind::AGB, 6, 5, 2, rng);
  const Matrix chain = oracle::triple_loop_matmul(oracle::triple_loop_matmul(agb.a, agb.g), agb.b);
  CHECK(max_abs_diff(delta(agb), chain) <= 1e-12);

  const ExtensionState adb = random_state(ExtensionKind::ADB, 6, 5, 2, rng);
  CHECK(max_abs_diff(delta(adb), oracle::triple_loop_matmul(scale_columns(adb.a, adb.d), adb.b)) <= 1e-12);

  const Matrix w = rng.gaussian(6, 5);
  const ExtensionState serial = random_state(ExtensionKind::SerialAdapter, 6, 5, 2, rng);
  CHECK(max_abs_diff(delta(serial, w), matmul(relu_entrywise(matmul(w, serial.a)), serial.b)) <= 1e-12);
  const ExtensionState parallel = random_state(ExtensionKind::ParallelAdapter, 6, 5, 2, rng);
  CHECK(max_abs_diff(delta(parallel, w), matmul(relu_entrywise(parallel.a), parallel.b)) <= 1e-12);

  CHECK_THROWS_AS(delta(serial), UnsupportedKind);
  CHECK_THROWS_AS(delta(parallel), UnsupportedKind);
  CHECK_THROWS_AS(apply(agb, rng.gaussian(5, 5)), ShapeError);
}

TEST_CASE("apply is linear in the scale") {
  Rng rng(13);
  const Matrix w = rng.gaussian(6, 5);
  for (ExtensionKind kind : kAllKinds) {
    ExtensionState s = random_state(kind, 6, 5, 2, rng);
    s.scale = 0.0;
    CHECK(apply(s, w) == w);
    s.scale = 1.0;
    const Matrix one = apply(s, w);
    s.scale = 2.0;
    CHECK(max_abs_diff(apply(s, w) - one, delta(s, w)) <= 1e-12);
  }
}

TEST_CASE("delta is linear in B") {
  Rng rng(14);
  ExtensionState s = random_state(ExtensionKind::LoRA, 7, 6, 3, rng);
  const Matrix base = delta(s);
  s.b *= 2.0;
  CHECK(delta(s) == 2.0 * base);
}

TEST_CASE("rank of the addition term is at most r") {
  Rng rng(15);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + rng.next() % 10, m = 3 + rng.next() % 10;
    const std::size_t r = 1 + rng.next() % (std::min(n, m) - 1);
    const Matrix w = rng.gaussian(n, m);
    for (ExtensionKind kind : kAllKinds) {
      const SvdFactors f = svd(delta(random_state(kind, n, m, r, rng), w));
      CHECK(f.sigma[r] <= 1e-10 * f.sigma[0]);
    }
  }
}

TEST_CASE("equivalence transform preserves the product") {
  Rng rng(16);
  const Matrix a = rng.gaussian(5, 2), b = rng.gaussian(2, 4);

  const EquivalentFactors id = equivalence_transform(a, Matrix::identity(2), b);
  CHECK(max_abs_diff(matmul(id.a_star, id.b_diamond), matmul(a, b)) <= 1e-12);

  // G = diag(2, 3): the larger singular value leads, so A* = [±3·a₂ | ±2·a₁].
  const EquivalentFactors dg = equivalence_transform(a, Matrix{{2, 0}, {0, 3}}, b);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(std::abs(dg.a_star(i, 0)) - 3.0 * std::abs(a(i, 1))) <= 1e-12);
    CHECK(std::abs(std::abs(dg.a_star(i, 1)) - 2.0 * std::abs(a(i, 0))) <= 1e-12);
  }
  CHECK(relative_error(matmul(dg.a_star, dg.b_diamond), matmul(matmul(a, Matrix{{2, 0}, {0, 3}}), b)) <= 1e-12);

  const Matrix a8 = rng.gaussian(8, 3), g3 = rng.gaussian(3, 3), b7 = rng.gaussian(3, 7);
  const EquivalentFactors r = equivalence_transform(a8, g3, b7);
  const Matrix agb = matmul(matmul(a8, g3), b7);
  CHECK(frobenius_norm(agb - matmul(r.a_star, r.b_diamond)) <= 1e-11 * frobenius_norm(agb));

  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.next() % 12, m = 1 + rng.next() % 12, k = 1 + rng.next() % 6;
    const Matrix ta = rng.gaussian(n, k), tg = rng.gaussian(k, k), tb = rng.gaussian(k, m);
    const EquivalentFactors e = equivalence_transform(ta, tg, tb);
    REQUIRE(relative_error(matmul(e.a_star, e.b_diamond), matmul(matmul(ta, tg), tb)) <= 1e-10);
  }

  CHECK_THROWS_AS(equivalence_transform(a, rng.gaussian(2, 3), b), ShapeError);
  CHECK_THROWS_AS(equivalence_transform(a, Matrix::identity(3), b), ShapeError);
}

TEST_CASE("constrained factors are semi-orthogonal") {
  const ConstrainedFactors id = construct_constrained_factors(Matrix::identity(4), 2);
  CHECK(max_abs_diff(matmul_tn(id.a, id.a), Matrix::identity(2)) <= 1e-15);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const double v = std::abs(id.a(i, j));
      CHECK((v == 0.0 || v == 1.0));
    }

  Rng rng(17);
  const ConstrainedFactors f = construct_constrained_factors(rng.gaussian(6, 5), 3);
  CHECK(max_abs_diff(matmul_tn(f.a, f.a), Matrix::identity(3)) <= 1e-10);
  CHECK(max_abs_diff(matmul_nt(f.b, f.b), Matrix::identity(3)) <= 1e-10);

  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.next() % 10, m = 1 + rng.next() % 10;
    const Matrix target = rng.gaussian(n, m);
    for (std::size_t r = 1; r <= std::min(n, m); ++r) {
      const ConstrainedFactors c = construct_constrained_factors(target, r);
      REQUIRE(max_abs_diff(matmul_tn(c.a, c.a), Matrix::identity(r)) <= 1e-9);
      REQUIRE(max_abs_diff(matmul_nt(c.b, c.b), Matrix::identity(r)) <= 1e-9);
      REQUIRE(relative_error(matmul(scale_columns(c.a, c.sigma), c.b), truncate(svd(target), r)) <= 1e-10);
    }
  }

  CHECK_THROWS_AS(construct_constrained_factors(rng.gaussian(3, 4), 0), ShapeError);
  CHECK_THROWS_AS(construct_constrained_factors(rng.gaussian(3, 4), 4), ShapeError);
}

TEST_CASE("constrained factors give the best rank-r approximation on integer 3x3 targets") {
  // Squared error of the rank-r product must equal the discarded Gram eigenvalues.
  Rng rng(18);
  for (int t = 0; t < 300; ++t) {
    Matrix w(3, 3);
    for (double& v : w.values()) v = static_cast<double>(static_cast<int>(rng.next() % 7) - 3);
    const auto ev = oracle::integer_gram3_eigenvalues(w);
    for (std::size_t r = 1; r <= 3; ++r) {
      const ConstrainedFactors c = construct_constrained_factors(w, r);
      double tail = 0.0;
      for (std::size_t k = r; k < 3; ++k) tail += std::max(ev[k], 0.0);
      const double err = frobenius_norm(w - matmul(scale_columns(c.a, c.sigma), c.b));
      REQUIRE(std::abs(err * err - tail) <= 1e-10);
    }
  }
}

TEST_CASE("serial adapter") {
  Rng rng(19);
  const Matrix x = rng.gaussian(4, 5);
  const Matrix a = rng.gaussian(5, 2), b = rng.gaussian(2, 5);
  CHECK(serial_adapter_forward(x, a, Matrix(2, 5), Activation::Relu) == x);

  const Matrix lin = serial_adapter_forward(x, a, b, Activation::Identity);
  CHECK(max_abs_diff(lin, x + matmul(x, matmul(a, b))) <= 1e-12);

  Matrix xr = x;
  for (std::size_t j = 0; j < 5; ++j) xr(0, j) = -a(j, 0);  // row 0 pre-activation of unit 0 is −‖a₀‖²
  Matrix pre = oracle::triple_loop_matmul(xr, a);
  REQUIRE(pre(0, 0) < 0.0);
  const Matrix expect = xr + oracle::triple_loop_matmul(relu_entrywise(pre), b);
  CHECK(max_abs_diff(serial_adapter_forward(xr, a, b, Activation::Relu), expect) <= 1e-12);

  CHECK_THROWS_AS(serial_adapter_forward(x, rng.gaussian(4, 2), b, Activation::Relu), ShapeError);
}

TEST_CASE("parallel adapter") {
  Rng rng(20);
  const Matrix x = rng.gaussian(4, 6), w = rng.gaussian(6, 5);
  const Matrix a = rng.gaussian(6, 2), b = rng.gaussian(2, 5);
  CHECK(parallel_adapter_forward(x, w, a, Matrix(2, 5), Activation::Tanh) == matmul(x, w));
  CHECK(max_abs_diff(parallel_adapter_forward(x, w, a, b, Activation::Identity), matmul(x, w + matmul(a, b))) <= 1e-12);

  Matrix h = oracle::triple_loop_matmul(x, a);
  for (double& v : h.values()) v = std::tanh(v);
  const Matrix expect = oracle::triple_loop_matmul(x, w) + oracle::triple_loop_matmul(h, b);
  CHECK(max_abs_diff(parallel_adapter_forward(x, w, a, b, Activation::Tanh), expect) <= 1e-12);

  CHECK_THROWS_AS(parallel_adapter_forward(x, w, rng.gaussian(5, 2), b, Activation::Relu), ShapeError);
}
