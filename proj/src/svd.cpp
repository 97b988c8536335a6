#include "subspace/svd.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

#include "subspace/errors.hpp"

namespace subspace {

namespace {

constexpr int kMaxSweeps = 60;
constexpr double kRotationTol = 1e-14;

// Extends the orthonormal rows of `basis` flagged in `have` until every row is
// filled. Each new row starts from the canonical unit vector with the largest
// residual outside the current span (1 − Σ_k b_kj²), orthogonalized by two
// passes of classical Gram-Schmidt.
void complete_orthonormal_rows(Matrix& basis, std::vector<bool>& have) {
  const std::size_t dim = basis.cols();
  Vector captured(dim, 0.0);
  for (std::size_t k = 0; k < basis.rows(); ++k) {
    if (!have[k]) continue;
    auto bk = basis.row_span(k);
    for (std::size_t t = 0; t < dim; ++t) captured[t] += bk[t] * bk[t];
  }
  for (std::size_t slot = 0; slot < basis.rows(); ++slot) {
    if (have[slot]) continue;
    const auto pick = static_cast<std::size_t>(
        std::min_element(captured.begin(), captured.end()) - captured.begin());
    Vector e(dim, 0.0);
    e[pick] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < basis.rows(); ++k) {
        if (!have[k]) continue;
        auto bk = basis.row_span(k);
        const double proj = dot(bk, e);
        for (std::size_t t = 0; t < dim; ++t) e[t] -= proj * bk[t];
      }
    }
    const double nrm = norm2(e);
    auto dst = basis.row_span(slot);
    for (std::size_t t = 0; t < dim; ++t) {
      dst[t] = e[t] / nrm;
      captured[t] += dst[t] * dst[t];
    }
    have[slot] = true;
  }
}

// Factors a wide (or square) matrix, rows <= cols. Returns U (n×n, as
// columns), sigma (n), and V (m×m, as columns).
SvdFactors svd_wide(const Matrix& w) {
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();

  // Rows of `work` are rotated pairwise until mutually orthogonal; `rot`
  // accumulates the same rotations so that W = rotᵀ·work.
  Matrix work = w;
  Matrix rot = Matrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto rp = work.row_span(p);
        auto rq = work.row_span(q);
        const double alpha = dot(rp, rp);
        const double beta = dot(rq, rq);
        const double gamma = dot(rp, rq);
        if (gamma == 0.0 || std::abs(gamma) <= kRotationTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double a = rp[k], b = rq[k];
          rp[k] = c * a - s * b;
          rq[k] = s * a + c * b;
        }
        auto jp = rot.row_span(p);
        auto jq = rot.row_span(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double a = jp[k], b = jq[k];
          jp[k] = c * a - s * b;
          jq[k] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  Vector sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = norm2(work.row_span(i));
  const double sigma_max = n == 0 ? 0.0 : *std::max_element(sigma.begin(), sigma.end());
  const double null_cut = static_cast<double>(std::max(n, m)) * DBL_EPSILON * sigma_max;

  // Right singular vectors as rows of vt (m×m); rows past n and null rows are completed.
  Matrix vt(m, m);
  std::vector<bool> have(m, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (sigma[i] > null_cut && sigma[i] > 0.0) {
      auto src = work.row_span(i);
      auto dst = vt.row_span(i);
      for (std::size_t k = 0; k < m; ++k) dst[k] = src[k] / sigma[i];
      have[i] = true;
    } else {
      sigma[i] = 0.0;
    }
  }
  complete_orthonormal_rows(vt, have);

  // Descending order; ties keep index order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdFactors f{Matrix(n, n), Vector(n), Matrix(m, m)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    f.sigma[k] = sigma[src];
    for (std::size_t i = 0; i < n; ++i) f.u(i, k) = rot(src, i);
    for (std::size_t i = 0; i < m; ++i) f.v(i, k) = vt(src, i);
  }
  for (std::size_t k = n; k < m; ++k)
    for (std::size_t i = 0; i < m; ++i) f.v(i, k) = vt(k, i);
  return f;
}

void apply_sign_convention(SvdFactors& f) {
  const std::size_t n = f.u.rows();
  const std::size_t k = f.sigma.size();
  for (std::size_t j = 0; j < f.u.cols(); ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(f.u(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (f.u(arg, j) >= 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) f.u(i, j) = -f.u(i, j);
    if (j < k) {
      for (std::size_t i = 0; i < f.v.rows(); ++i) f.v(i, j) = -f.v(i, j);
    }
  }
}

}  // namespace

SvdFactors svd(const Matrix& w) {
  if (!w.all_finite()) throw DomainError("svd: non-finite input");
  SvdFactors f;
  if (w.rows() <= w.cols()) {
    f = svd_wide(w);
  } else {
    SvdFactors t = svd_wide(w.transpose());
    f = SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
  }
  apply_sign_convention(f);
  return f;
}

Matrix compose(const SvdFactors& factors, std::span<const double> sigma) {
  const std::size_t n = factors.u.rows();
  const std::size_t m = factors.v.rows();
  if (sigma.size() > std::min(n, m)) throw ShapeError("compose: too many singular values");
  Matrix out(n, m);
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    const double s = sigma[k];
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double us = factors.u(i, k) * s;
      if (us == 0.0) continue;
      auto row = out.row_span(i);
      for (std::size_t j = 0; j < m; ++j) row[j] += us * factors.v(j, k);
    }
  }
  return out;
}

Matrix truncate(const SvdFactors& factors, std::size_t r) {
  if (r > factors.sigma.size()) throw ShapeError("truncate: rank exceeds min(n, m)");
  return compose(factors, std::span<const double>(factors.sigma).first(r));
}

double pinv_relative_cutoff(std::size_t rows, std::size_t cols) {
  return 1e-12 * static_cast<double>(std::max(rows, cols));
}

std::size_t numerical_rank(const SvdFactors& factors, double rel_tol) {
  if (factors.sigma.empty()) return 0;
  if (rel_tol < 0.0) rel_tol = pinv_relative_cutoff(factors.u.rows(), factors.v.rows());
  const double cut = rel_tol * factors.sigma.front();
  return static_cast<std::size_t>(std::count_if(factors.sigma.begin(), factors.sigma.end(),
                                                [cut](double s) { return s > cut; }));
}

std::size_t numerical_rank(const Matrix& w, double rel_tol) { return numerical_rank(svd(w), rel_tol); }

Matrix pinv(const Matrix& w) {
  const SvdFactors f = svd(w);
  const std::size_t n = w.rows();
  const std::size_t m = w.cols();
  Matrix out(m, n);
  if (f.sigma.empty()) return out;
  const double cut = pinv_relative_cutoff(n, m) * f.sigma.front();
  for (std::size_t k = 0; k < f.sigma.size(); ++k) {
    if (f.sigma[k] <= cut) continue;
    const double inv = 1.0 / f.sigma[k];
    for (std::size_t i = 0; i < m; ++i) {
      const double vi = f.v(i, k) * inv;
      if (vi == 0.0) continue;
      auto row = out.row_span(i);
      for (std::size_t j = 0; j < n; ++j) row[j] += vi * f.u(j, k);
    }
  }
  return out;
}

}  // namespace subspace
