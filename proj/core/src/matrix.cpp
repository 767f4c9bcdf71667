#include "deus/matrix.hpp"

#include <cmath>
#include <utility>

#include "deus/errors.hpp"

namespace deus {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

Matrix2D Matrix2D::from_data(std::size_t r, std::size_t c, std::vector<double> values) {
  if (values.size() != r * c) {
    throw ShapeError("matrix data length " + std::to_string(values.size()) +
                     " does not match " + std::to_string(r) + "x" + std::to_string(c));
  }
  Matrix2D m;
  m.rows = r;
  m.cols = c;
  m.data = std::move(values);
  m.ensure_finite("matrix");
  return m;
}

Matrix2D Matrix2D::identity(std::size_t n) {
  Matrix2D m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix2D::ensure_finite(const std::string& what) const {
  if (!all_finite(data)) {
    throw FormatError(FormatError::Fault::NonFinite, what + " contains NaN/Inf");
  }
}

double Matrix2D::max_abs() const {
  double m = 0.0;
  for (double x : data) m = std::max(m, std::fabs(x));
  return m;
}

Vector1D Vector1D::from_data(std::vector<double> values) {
  Vector1D v;
  v.data = std::move(values);
  v.ensure_finite("vector");
  return v;
}

void Vector1D::ensure_finite(const std::string& what) const {
  if (!all_finite(data)) {
    throw FormatError(FormatError::Fault::NonFinite, what + " contains NaN/Inf");
  }
}

std::string shape_string(const Matrix2D& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix2D matmul(const Matrix2D& a, const Matrix2D& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matmul shape mismatch: " + shape_string(a) + " times " + shape_string(b));
  }
  Matrix2D out(a.rows, b.cols);
  // i-k-j order keeps the inner loop contiguous over b and out.
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* out_row = out.data.data() + i * out.cols;
    const double* a_row = a.row_ptr(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      const double* b_row = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols; ++j) {
        out_row[j] += aik * b_row[j];
      }
    }
  }
  out.ensure_finite("matmul result");
  return out;
}

Matrix2D transpose(const Matrix2D& a) {
  Matrix2D out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      out(j, i) = a(i, j);
    }
  }
  return out;
}

double row_l2_distance(const Matrix2D& x, const Matrix2D& y, std::size_t k, std::size_t j) {
  if (x.cols != y.cols) {
    throw ShapeError("row_l2_distance column mismatch: " + shape_string(x) + " vs " +
                     shape_string(y));
  }
  if (k >= x.rows || j >= y.rows) {
    throw ShapeError("row_l2_distance index out of range: k=" + std::to_string(k) +
                     " j=" + std::to_string(j) + " for " + shape_string(x) + " vs " +
                     shape_string(y));
  }
  const double* xr = x.row_ptr(k);
  const double* yr = y.row_ptr(j);
  double acc = 0.0;
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double d = xr[c] - yr[c];
    acc += d * d;
  }
  return std::sqrt(acc);
}

Matrix2D elementwise_average(const Matrix2D& a, const Matrix2D& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("elementwise_average shape mismatch: " + shape_string(a) + " vs " +
                     shape_string(b));
  }
  Matrix2D out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = 0.5 * (a.data[i] + b.data[i]);
  }
  return out;
}

Vector1D elementwise_average(const Vector1D& a, const Vector1D& b) {
  if (a.len() != b.len()) {
    throw ShapeError("elementwise_average length mismatch: " + std::to_string(a.len()) +
                     " vs " + std::to_string(b.len()));
  }
  Vector1D out(a.len());
  for (std::size_t i = 0; i < a.len(); ++i) {
    out[i] = 0.5 * (a[i] + b[i]);
  }
  return out;
}

Vector1D transposed_matvec(const Matrix2D& m, const Vector1D& v) {
  if (m.rows != v.len()) {
    throw ShapeError("transposed_matvec shape mismatch: " + shape_string(m) + " vs vector of " +
                     std::to_string(v.len()));
  }
  Vector1D out(m.cols);
  for (std::size_t k = 0; k < m.rows; ++k) {
    const double vk = v[k];
    if (vk == 0.0) continue;
    const double* row = m.row_ptr(k);
    for (std::size_t j = 0; j < m.cols; ++j) {
      out[j] += row[j] * vk;
    }
  }
  return out;
}

}  // namespace deus
