#include "bmolab/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "bmolab/error.hpp"

namespace bmolab {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = static_cast<int>(rows.size());
  cols_ = rows_ ? static_cast<int>(rows.begin()->size()) : 0;
  a_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) throw ShapeMismatch("ragged matrix literal");
    a_.insert(a_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(int d) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  const int d = static_cast<int>(values.size());
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::from_data(int rows, int cols, std::span<const double> data) {
  if (data.size() != static_cast<std::size_t>(rows) * cols)
    throw ShapeMismatch("matrix data length " + std::to_string(data.size()));
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.a_.begin());
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool Matrix::finite() const {
  return std::all_of(a_.begin(), a_.end(), [](double x) { return std::isfinite(x); });
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw ShapeMismatch("matrix sum");
  for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw ShapeMismatch("matrix difference");
  for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : a_) x *= s;
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeMismatch("matrix product");
  Matrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (static_cast<int>(x.size()) != a.cols()) throw ShapeMismatch("matrix-vector product");
  std::vector<double> y(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
  return y;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeMismatch("max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double euclidean_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

namespace kernel {

void matmul(const double* a, const double* b, double* c, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += a[i * d + k] * b[k * d + j];
      c[i * d + j] = s;
    }
}

void matvec(const double* a, const double* x, double* y, int d) {
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += a[i * d + k] * x[k];
    y[i] = s;
  }
}

int jacobi(double* a, double* w, double* v, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v[i * d + j] = (i == j) ? 1.0 : 0.0;

  auto off_mass = [&] {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (i != j) s += a[i * d + j] * a[i * d + j];
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (int k = 0; k < d * d; ++k) scale += a[k] * a[k];
  scale = std::sqrt(scale);

  int sweep = 0;
  for (; sweep < 100; ++sweep) {
    if (off_mass() <= 1e-15 * scale) break;
    for (int p = 0; p < d - 1; ++p)
      for (int q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a[k * d + p];
          const double akq = a[k * d + q];
          a[k * d + p] = c * akp - s * akq;
          a[k * d + q] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a[p * d + k];
          const double aqk = a[q * d + k];
          a[p * d + k] = c * apk - s * aqk;
          a[q * d + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < d; ++k) {
          const double vkp = v[k * d + p];
          const double vkq = v[k * d + q];
          v[k * d + p] = c * vkp - s * vkq;
          v[k * d + q] = s * vkp + c * vkq;
        }
      }
  }
  for (int i = 0; i < d; ++i) w[i] = a[i * d + i];
  return sweep;
}

double op_norm_sq(const double* a, int d) {
  if (d == 1) return a[0] * a[0];
  if (d == 2) {
    const double s = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3];
    const double det = a[0] * a[3] - a[1] * a[2];
    const double disc = std::max(0.0, s * s - 4.0 * det * det);
    return 0.5 * (s + std::sqrt(disc));
  }
  std::array<double, kMaxDim * kMaxDim> ata{};
  std::array<double, kMaxDim * kMaxDim> vec{};
  std::array<double, kMaxDim> w{};
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += a[k * d + i] * a[k * d + j];
      ata[i * d + j] = s;
      ata[j * d + i] = s;
    }
  jacobi(ata.data(), w.data(), vec.data(), d);
  double m = 0.0;
  for (int i = 0; i < d; ++i) m = std::max(m, w[i]);
  return m;
}

}  // namespace kernel

SymmetricEigen eigen_symmetric(const Matrix& a) {
  if (!a.square()) throw ShapeMismatch("eigen_symmetric needs a square matrix");
  const int d = a.rows();
  if (d > kMaxDim) throw ShapeMismatch("dimension " + std::to_string(d) + " exceeds kMaxDim");
  if (!a.finite()) throw NonFinite("non-finite matrix entry", std::nan(""));
  const double scale = std::max(frobenius(a), 1e-300);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale)
        throw NotSymmetric("matrix not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");

  std::array<double, kMaxDim * kMaxDim> buf{};
  std::array<double, kMaxDim * kMaxDim> vec{};
  std::array<double, kMaxDim> w{};
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) buf[i * d + j] = 0.5 * (a(i, j) + a(j, i));
  kernel::jacobi(buf.data(), w.data(), vec.data(), d);

  SymmetricEigen e;
  e.values.assign(w.begin(), w.begin() + d);
  e.vectors = Matrix::from_data(d, d, std::span<const double>(vec.data(), static_cast<std::size_t>(d) * d));
  return e;
}

Matrix reconstruct(const SymmetricEigen& e, std::span<const double> values) {
  const int d = e.vectors.rows();
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += e.vectors(i, k) * values[k] * e.vectors(j, k);
      m(i, j) = s;
      m(j, i) = s;
    }
  return m;
}

HermitianPD::HermitianPD(const Matrix& a, double eig_floor) : eig_(eigen_symmetric(a)), floor_(eig_floor) {
  for (double& l : eig_.values) {
    if (l < floor_) {
      l = floor_;
      ++clamped_;
    }
  }
  m_ = clamped_ ? reconstruct(eig_, eig_.values) : a;
  if (!clamped_) {
    const int d = m_.rows();
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) m_(i, j) = m_(j, i) = 0.5 * (a(i, j) + a(j, i));
  }
}

double HermitianPD::min_eigenvalue() const {
  return *std::min_element(eig_.values.begin(), eig_.values.end());
}

double HermitianPD::max_eigenvalue() const {
  return *std::max_element(eig_.values.begin(), eig_.values.end());
}

HermitianPD hermitian_power(const HermitianPD& a, double s) {
  if (!std::isfinite(s)) throw NonFinite("non-finite exponent", s);
  HermitianPD r;
  r.floor_ = a.floor_;
  r.clamped_ = a.clamped_;
  r.eig_ = a.eig_;
  for (double& l : r.eig_.values) {
    const double v = std::pow(l, s);
    if (!std::isfinite(v) || v <= 0.0)
      throw NonFinite("eigenvalue " + std::to_string(l) + " raised to " + std::to_string(s) + " is not finite", l);
    l = v;
  }
  r.m_ = reconstruct(r.eig_, r.eig_.values);
  return r;
}

double op_norm(const Matrix& a) {
  if (!a.finite()) throw NonFinite("op_norm of non-finite matrix", std::nan(""));
  if (a.square() && a.rows() <= kMaxDim) return std::sqrt(kernel::op_norm_sq(a.data().data(), a.rows()));
  const Matrix ata = a.transpose() * a;
  const auto e = eigen_symmetric(ata);
  return std::sqrt(std::max(0.0, *std::max_element(e.values.begin(), e.values.end())));
}

double column_norm_sum(const Matrix& a) {
  double total = 0.0;
  for (int j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    total += std::sqrt(s);
  }
  return total;
}

Matrix realify(const ComplexMatrix& a) {
  const int d = static_cast<int>(a.size());
  Matrix r(2 * d, 2 * d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(a[i].size()) != d) throw ShapeMismatch("realify needs a square matrix");
    for (int j = 0; j < d; ++j) {
      const auto z = a[i][j];
      r(i, j) = z.real();
      r(i, j + d) = -z.imag();
      r(i + d, j) = z.imag();
      r(i + d, j + d) = z.real();
    }
  }
  return r;
}

}  // namespace bmolab
