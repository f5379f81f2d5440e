#pragma once

#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

namespace bmolab {

inline constexpr double kEigFloor = 1e-12;

/// Largest supported matrix dimension after realification.
inline constexpr int kMaxDim = 16;

/// Dense real matrix, row-major. Used directly for symbols and products;
/// positive-definite quantities go through HermitianPD.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(int d);
  static Matrix diagonal(std::span<const double> values);
  static Matrix from_data(int rows, int cols, std::span<const double> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<double> data() { return a_; }
  std::span<const double> data() const { return a_; }

  Matrix transpose() const;
  bool finite() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

using GeneralMatrix = Matrix;

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
std::vector<double> operator*(const Matrix& a, std::span<const double> x);

double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius(const Matrix& a);
double euclidean_norm(std::span<const double> x);

/// Eigen-decomposition of a real symmetric matrix; vectors are the columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

/// Cyclic Jacobi. Throws NotSymmetric if asymmetric beyond 1e-12 (relative).
SymmetricEigen eigen_symmetric(const Matrix& a);

/// V diag(f(lambda)) V^T for an already decomposed matrix.
Matrix reconstruct(const SymmetricEigen& e, std::span<const double> values);

/// Positive-definite symmetric matrix. Eigenvalues below the floor are
/// clamped on construction; the number clamped is kept for reporting.
class HermitianPD {
 public:
  explicit HermitianPD(const Matrix& a, double eig_floor = kEigFloor);

  static HermitianPD identity(int d) { return HermitianPD(Matrix::identity(d)); }

  int dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  const SymmetricEigen& eigen() const { return eig_; }
  double min_eigenvalue() const;
  double max_eigenvalue() const;
  int clamped() const { return clamped_; }
  double eig_floor() const { return floor_; }

 private:
  HermitianPD() = default;
  friend HermitianPD hermitian_power(const HermitianPD&, double);

  Matrix m_;
  SymmetricEigen eig_;
  int clamped_ = 0;
  double floor_ = kEigFloor;
};

/// A^s through the eigen-decomposition. Throws NonFinite when the result
/// overflows (negative s on a clamped eigenvalue).
HermitianPD hermitian_power(const HermitianPD& a, double s);

/// Largest singular value, sqrt of the top eigenvalue of A^T A.
double op_norm(const Matrix& a);

/// Sum of Euclidean column norms; op_norm <= this <= d * op_norm.
double column_norm_sum(const Matrix& a);

using ComplexMatrix = std::vector<std::vector<std::complex<double>>>;

/// Real 2d x 2d embedding [[Re, -Im], [Im, Re]] of a complex d x d matrix.
/// Hermitian maps to symmetric; products, norms and powers commute with it.
Matrix realify(const ComplexMatrix& a);

namespace kernel {

// Raw small-matrix routines on row-major d x d buffers, d <= kMaxDim.
// These back the hot loops in the norm computations.

void matmul(const double* a, const double* b, double* c, int d);
void matvec(const double* a, const double* x, double* y, int d);

/// Square of the largest singular value.
double op_norm_sq(const double* a, int d);

/// In-place Jacobi on a (destroyed); eigenvalues to w, eigenvectors to v
/// (column j is the j-th vector). Returns the sweep count.
int jacobi(double* a, double* w, double* v, int d);

}  // namespace kernel

}  // namespace bmolab
