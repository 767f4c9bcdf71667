#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace deus {

// Dense row-major f64 matrix. Carrier for all weights and transport plans.
// Values are immutable by convention once an instance leaves its builder;
// operations allocate fresh outputs.
struct Matrix2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, length rows*cols

  Matrix2D() = default;
  Matrix2D(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  // Validates length and finiteness; throws ShapeError / FormatError.
  static Matrix2D from_data(std::size_t r, std::size_t c, std::vector<double> values);
  static Matrix2D zeros(std::size_t r, std::size_t c) { return Matrix2D(r, c); }
  static Matrix2D identity(std::size_t n);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

  bool same_shape(const Matrix2D& other) const {
    return rows == other.rows && cols == other.cols;
  }
  bool operator==(const Matrix2D&) const = default;

  // Throws FormatError(NonFinite) if any entry is NaN/Inf. `what` names the
  // matrix in the message.
  void ensure_finite(const std::string& what) const;

  double max_abs() const;
};

// Dense f64 vector (RMSNorm weights, OT marginals).
struct Vector1D {
  std::vector<double> data;

  Vector1D() = default;
  explicit Vector1D(std::size_t n, double fill = 0.0) : data(n, fill) {}

  static Vector1D from_data(std::vector<double> values);

  std::size_t len() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  bool operator==(const Vector1D&) const = default;

  void ensure_finite(const std::string& what) const;
};

// Standard product with f64 accumulation. Throws ShapeError naming both
// shapes when a.cols != b.rows.
Matrix2D matmul(const Matrix2D& a, const Matrix2D& b);

Matrix2D transpose(const Matrix2D& a);

// Euclidean distance between row k of x and row j of y.
// Requires x.cols == y.cols and in-range indices.
double row_l2_distance(const Matrix2D& x, const Matrix2D& y, std::size_t k, std::size_t j);

// Elementwise helpers used by the fusion flow.
Matrix2D elementwise_average(const Matrix2D& a, const Matrix2D& b);
Vector1D elementwise_average(const Vector1D& a, const Vector1D& b);

// y[j] = sum_k m(k, j) * v[k]  (applies a plan transposed to a vector).
Vector1D transposed_matvec(const Matrix2D& m, const Vector1D& v);

std::string shape_string(const Matrix2D& m);

}  // namespace deus
