#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "subspace/errors.hpp"
#include "subspace/matrix.hpp"
#include "subspace/random.hpp"
#include "subspace/svd.hpp"

using namespace subspace;

namespace {

double orthonormality_error(const Matrix& q) {
  return max_abs_diff(matmul_tn(q, q), Matrix::identity(q.cols()));
}

bool is_signed_permutation(const Matrix& q) {
  for (std::size_t i = 0; i < q.rows(); ++i) {
    int nonzero = 0;
    for (std::size_t j = 0; j < q.cols(); ++j) {
      const double v = std::abs(q(i, j));
      if (v > 1e-12) {
        if (std::abs(v - 1.0) > 1e-12) return false;
        ++nonzero;
      }
    }
    if (nonzero != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("matmul") {
  Rng rng(1);
  const Matrix x = rng.gaussian(3, 4);
  CHECK(matmul(Matrix::identity(3), x) == x);

  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{0}, {1}};
  CHECK(matmul(a, b) == Matrix{{2}, {4}});

  const Matrix p = rng.gaussian(7, 5), q = rng.gaussian(5, 3);
  CHECK(max_abs_diff(matmul(p, q), oracle::triple_loop_matmul(p, q)) <= 1e-12);

  const Matrix r = rng.gaussian(7, 2);
  CHECK(max_abs_diff(matmul_tn(p, r), oracle::triple_loop_matmul(p.transpose(), r)) <= 1e-12);
  const Matrix s = rng.gaussian(4, 5);
  CHECK(max_abs_diff(matmul_nt(p, s), oracle::triple_loop_matmul(p, s.transpose())) <= 1e-12);

  CHECK_THROWS_AS(matmul(p, p), ShapeError);
  CHECK_THROWS_AS(matmul_tn(p, q), ShapeError);
  CHECK_THROWS_AS(matmul_nt(p, q), ShapeError);
}

TEST_CASE("norms") {
  CHECK(frobenius_norm(Matrix::identity(2)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  const Vector cn = column_norms(Matrix{{3, 0}, {4, 0}});
  CHECK(cn == Vector{5.0, 0.0});

  Rng rng(2);
  const Matrix w = rng.gaussian(5, 5);
  double sum = 0.0;
  for (double c : column_norms(w)) sum += c * c;
  const double f = frobenius_norm(w);
  CHECK(std::abs(f * f - sum) <= 1e-12);
}

TEST_CASE("matrix construction and helpers") {
  CHECK_THROWS_AS(Matrix(2, 2, Vector{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
  const Matrix w{{1, 2, 3}, {4, 5, 6}};
  CHECK(w.transpose() == Matrix{{1, 4}, {2, 5}, {3, 6}});
  CHECK(w.block(0, 1, 2, 2) == Matrix{{2, 3}, {5, 6}});
  CHECK(scale_columns(w, Vector{1, 0, 2}) == Matrix{{1, 0, 6}, {4, 0, 12}});
  CHECK(scale_rows(Vector{2, -1}, w) == Matrix{{2, 4, 6}, {-4, -5, -6}});
  CHECK(column_sums(w) == Vector{5, 7, 9});
  CHECK(vstack(w, Matrix{{7, 8, 9}}).rows() == 3);
  CHECK(hstack(w, Matrix(2, 1, 1.0)) == Matrix{{1, 2, 3, 1}, {4, 5, 6, 1}});
  CHECK(Matrix::diagonal(2, 3, Vector{7, 8}) == Matrix{{7, 0, 0}, {0, 8, 0}});
  CHECK_THROWS_AS(scale_columns(w, Vector{1, 2}), ShapeError);

  Matrix bad = w;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(bad.all_finite());
  CHECK(w.all_finite());
}

TEST_CASE("svd of small known matrices") {
  const SvdFactors id = svd(Matrix::identity(4));
  CHECK(id.sigma == Vector{1, 1, 1, 1});

  const SvdFactors d = svd(Matrix{{3, 0}, {0, 1}});
  CHECK(d.sigma[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(d.sigma[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(is_signed_permutation(d.u));
  CHECK(is_signed_permutation(d.v));

  const SvdFactors z = svd(Matrix(3, 2));
  CHECK(z.sigma == Vector{0, 0});
  CHECK(orthonormality_error(z.u) <= 1e-12);
  CHECK(orthonormality_error(z.v) <= 1e-12);

  Matrix nan(2, 2);
  nan(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(svd(nan), DomainError);
}

TEST_CASE("svd singular values match the Gram-matrix eigen oracle") {
  Rng rng(3);
  const Matrix w = rng.gaussian(8, 6);
  const SvdFactors f = svd(w);
  CHECK(relative_error(reconstruct(f), w) <= 1e-10);
  const std::vector<double> ev = oracle::symmetric_eigenvalues(matmul_nt(w, w));
  for (std::size_t i = 0; i < f.sigma.size(); ++i) {
    CHECK(std::abs(f.sigma[i] - std::sqrt(std::max(ev[i], 0.0))) <= 1e-8);
  }
  // The two surplus eigenvalues of W·Wᵀ belong to the null space.
  CHECK(std::abs(ev[6]) <= 1e-10);
  CHECK(std::abs(ev[7]) <= 1e-10);
}

TEST_CASE("svd sign convention and determinism") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix w = rng.gaussian(1 + rng.next() % 9, 1 + rng.next() % 9);
    const SvdFactors f = svd(w);
    for (std::size_t j = 0; j < f.u.cols(); ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < f.u.rows(); ++i)
        if (std::abs(f.u(i, j)) > std::abs(best)) best = f.u(i, j);
      CHECK(best >= 0.0);
    }
    const SvdFactors g = svd(w);
    CHECK(f.u == g.u);
    CHECK(f.v == g.v);
    CHECK(f.sigma == g.sigma);
  }
}

TEST_CASE("svd and pinv properties on random shapes up to 128x96") {
  Rng rng(5);
  double worst_rec = 0.0, worst_orth = 0.0, worst_penrose = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.next() % 128;
    const std::size_t m = 1 + rng.next() % 96;
    Matrix w = rng.gaussian(n, m);
    if (t % 5 == 0 && std::min(n, m) > 2) {
      // Rank-deficient instance.
      const std::size_t k = 1 + rng.next() % (std::min(n, m) - 1);
      w = matmul(rng.gaussian(n, k), rng.gaussian(k, m));
    }
    const SvdFactors f = svd(w);
    worst_rec = std::max(worst_rec, relative_error(reconstruct(f), w));
    worst_orth = std::max({worst_orth, orthonormality_error(f.u), orthonormality_error(f.v)});
    for (std::size_t i = 1; i < f.sigma.size(); ++i) REQUIRE(f.sigma[i - 1] >= f.sigma[i]);
    REQUIRE(f.sigma.back() >= 0.0);

    const Matrix p = pinv(w);
    const Matrix wp = matmul(w, p), pw = matmul(p, w);
    worst_penrose = std::max({worst_penrose, max_abs_diff(matmul(wp, w), w),
                              max_abs_diff(matmul(pw, p), p), max_abs_diff(wp, wp.transpose()),
                              max_abs_diff(pw, pw.transpose())});
  }
  CHECK(worst_rec <= 1e-10);
  CHECK(worst_orth <= 1e-10);
  CHECK(worst_penrose <= 1e-9);
}

TEST_CASE("pinv") {
  CHECK(max_abs_diff(pinv(Matrix::identity(3)), Matrix::identity(3)) <= 1e-15);
  CHECK(max_abs_diff(pinv(Matrix{{2, 0}, {0, 0}}), Matrix{{0.5, 0}, {0, 0}}) <= 1e-15);

  Rng rng(6);
  const Matrix w = rng.gaussian(6, 4);
  CHECK(max_abs_diff(matmul(matmul(w, pinv(w)), w), w) <= 1e-9);

  for (int t = 0; t < 20; ++t) {
    const Matrix full = rng.gaussian(2 + rng.next() % 10, 2 + rng.next() % 10);
    CHECK(relative_error(pinv(pinv(full)), full) <= 1e-8);
  }
}

TEST_CASE("numerical rank") {
  Rng rng(7);
  CHECK(numerical_rank(Matrix::identity(5)) == 5);
  CHECK(numerical_rank(Matrix(4, 3)) == 0);
  CHECK(numerical_rank(matmul(rng.gaussian(9, 3), rng.gaussian(3, 7))) == 3);
  CHECK(pinv_relative_cutoff(4, 10) == doctest::Approx(1e-11));
}

TEST_CASE("truncated svd is the best rank-r approximation on every {-1,0,1} 3x3 matrix") {
  // Eckart-Young: ‖W − W_r‖²_F equals the sum of the discarded eigenvalues of
  // WᵀW, which the oracle gets from the exact integer characteristic polynomial.
  double worst = 0.0;
  int digits[9];
  for (int code = 0; code < 19683; ++code) {
    int c = code;
    for (int& d : digits) {
      d = c % 3 - 1;
      c /= 3;
    }
    Matrix w(3, 3);
    for (int k = 0; k < 9; ++k) w(k / 3, k % 3) = digits[k];
    const auto ev = oracle::integer_gram3_eigenvalues(w);
    const SvdFactors f = svd(w);
    for (std::size_t r = 0; r <= 3; ++r) {
      double tail = 0.0;
      for (std::size_t k = r; k < 3; ++k) tail += std::max(ev[k], 0.0);
      const double err = frobenius_norm(w - truncate(f, r));
      worst = std::max(worst, std::abs(err * err - tail));
    }
  }
  CHECK(worst <= 1e-10);
}
