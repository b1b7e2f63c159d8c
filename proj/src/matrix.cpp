#include "scale/matrix.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "scale/errors.hpp"

namespace scale {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("Matrix: rows and cols must be >= 1");
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("Matrix: rows and cols must be >= 1");
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows * cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) {
      throw ShapeError("Matrix::from_rows: ragged rows");
    }
    data.insert(data.end(), r.begin(), r.end());
  }
  return Matrix(m, n, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix out(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
  return out;
}

Matrix Matrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

void Matrix::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(a.rows()),
              static_cast<int>(b.cols()), static_cast<int>(a.cols()), 1.0, a.data().data(),
              static_cast<int>(a.cols()), b.data().data(), static_cast<int>(b.cols()), 0.0,
              out.data().data(), static_cast<int>(out.cols()));
  return out;
}

Matrix gram(const Matrix& a) {
  const auto m = static_cast<int>(a.rows());
  const auto k = static_cast<int>(a.cols());
  Matrix out(a.rows(), a.rows());
  cblas_dsyrk(CblasRowMajor, CblasUpper, CblasNoTrans, m, k, 1.0, a.data().data(), k, 0.0,
              out.data().data(), m);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  constexpr std::size_t kTile = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile) {
    const std::size_t i1 = std::min(i0 + kTile, a.rows());
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile) {
      const std::size_t j1 = std::min(j0 + kTile, a.cols());
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out(j, i) = a(i, j);
      }
    }
  }
  return out;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
  require_same_shape(x, y, "axpy");
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] += alpha * xs[i];
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto os = out.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] *= bs[i];
  return out;
}

double squared_frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return acc;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(squared_frobenius_norm(a)); }

double inner_product(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "inner_product");
  auto as = a.data();
  auto bs = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < as.size(); ++i) acc += as[i] * bs[i];
  return acc;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  auto as = a.data();
  auto bs = b.data();
  double m = 0.0;
  for (std::size_t i = 0; i < as.size(); ++i) m = std::max(m, std::abs(as[i] - bs[i]));
  return m;
}

// Walks each column with stride cols(); the row-major layout makes this the
// slower of the two reductions.
std::vector<double> column_norms(const Matrix& g) {
  std::vector<double> out(g.cols(), 0.0);
  const auto data = g.data();
  const std::size_t n = g.cols();
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double v = data[i * n + j];
      acc += v * v;
    }
    out[j] = std::sqrt(acc);
  }
  return out;
}

std::vector<double> row_norms(const Matrix& g) {
  std::vector<double> out(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double acc = 0.0;
    for (double v : g.row(i)) acc += v * v;
    out[i] = std::sqrt(acc);
  }
  return out;
}

bool all_finite(const Matrix& a) noexcept {
  return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace scale
