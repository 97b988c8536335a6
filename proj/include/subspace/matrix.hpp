#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace subspace {

using Vector = std::vector<double>;

/// Dense row-major double-precision matrix.
///
/// Every weight, factor, input batch and gradient in the library is a Matrix.
/// Vectors of per-row or per-column scales are plain `Vector`s.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);
  /// rows x cols matrix with `d` on the main diagonal (rectangular diagonal).
  static Matrix diagonal(std::size_t rows, std::size_t cols, std::span<const double> d);
  static Matrix column(std::span<const double> v);
  static Matrix row(std::span<const double> v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row_span(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row_span(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  Vector col_vector(std::size_t j) const;
  Matrix transpose() const;
  /// Sub-block [r0, r0+nr) x [c0, c0+nc).
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  Matrix leading_cols(std::size_t k) const { return block(0, 0, rows_, k); }

  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// W·diag(d): scales column j by d[j].
Matrix scale_columns(const Matrix& w, std::span<const double> d);
/// diag(d)·W: scales row i by d[i].
Matrix scale_rows(std::span<const double> d, const Matrix& w);
Matrix hadamard(const Matrix& a, const Matrix& b);
/// Sum over rows, one value per column.
Vector column_sums(const Matrix& w);
Vector diagonal_of(const Matrix& w);
/// Stacks `top` above `bottom`; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);
/// Places `left` beside `right`; row counts must agree.
Matrix hstack(const Matrix& left, const Matrix& right);

double frobenius_norm(const Matrix& w);
Vector column_norms(const Matrix& w);
double max_abs(const Matrix& w);
double max_abs_diff(const Matrix& a, const Matrix& b);
/// ‖a − b‖_F / ‖b‖_F, or the absolute error when b is zero.
double relative_error(const Matrix& a, const Matrix& b);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

void require_shape(const Matrix& w, std::size_t rows, std::size_t cols, const char* what);

}  // namespace subspace
