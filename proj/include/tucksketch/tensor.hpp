#pragma once

// Dense N-way tensors and the multilinear algebra used throughout the library.
//
// Conventions
//   * Modes are 0-based: a tensor of order N has modes 0..N-1.
//   * Storage is first-index-fastest: entry (i_0, ..., i_{N-1}) lives at
//     i_0 + I_0 * (i_1 + I_1 * (i_2 + ...)).
//   * The mode-n unfolding X^(n) is I_n x prod_{m != n} I_m, with column index
//     j = sum_{m != n} i_m * prod_{l < m, l != n} I_l (lower modes vary
//     fastest; the Kolda-Bader convention).
//   * Matrices are Eigen column-major, so a first-index-fastest order-2 tensor
//     and the matrix with the same extents share a memory layout.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tks {

using Index = std::int64_t;
using Shape = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Index shape_product(std::span<const Index> shape);

class Tensor {
 public:
  // A 1-element order-1 tensor holding 0.
  Tensor();
  // Zero tensor of the given shape.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  Index order() const noexcept { return static_cast<Index>(shape_.size()); }
  Index extent(Index mode) const { return shape_.at(static_cast<std::size_t>(mode)); }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  Index linear_index(std::span<const Index> idx) const;
  double& operator()(std::initializer_list<Index> idx) { return data_[static_cast<std::size_t>(linear_index(idx))]; }
  double operator()(std::initializer_list<Index> idx) const { return data_[static_cast<std::size_t>(linear_index(idx))]; }
  double& at(std::span<const Index> idx) { return data_[static_cast<std::size_t>(linear_index(idx))]; }
  double at(std::span<const Index> idx) const { return data_[static_cast<std::size_t>(linear_index(idx))]; }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double alpha);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double alpha, Tensor a);

// Column-major view of a matrix as an order-2 tensor and back.
Tensor matrix_to_tensor(const Matrix& m);
Matrix tensor_to_matrix(const Tensor& t);

Matrix unfold(const Tensor& x, Index mode);
Tensor fold(const Matrix& m, Index mode, const Shape& shape);

// x ×_mode a: replaces extent I_mode by a.rows().
Tensor mode_product(const Tensor& x, Index mode, const Matrix& a);
// x ×_mode aᵀ without forming the transpose.
Tensor mode_product_transposed(const Tensor& x, Index mode, const Matrix& a);

struct ModeMatrix {
  Index mode;
  Matrix matrix;
};

// Applies every (mode, matrix) pair; at most one matrix per mode.
Tensor multi_mode_product(const Tensor& x, std::span<const ModeMatrix> mats);

double inner(const Tensor& x, const Tensor& y);
double fro_norm(const Tensor& x);

Matrix kronecker(const Matrix& a, const Matrix& b);
Matrix khatri_rao(const Matrix& a, const Matrix& b);

Tensor superdiag(std::span<const double> values, Index order);

// Contracts x with vecs[m] along every mode m != keep. vecs[keep] is ignored.
Vector contract_all_but(const Tensor& x, Index keep, std::span<const Vector> vecs);

struct TuckerFactorization {
  Tensor core;
  std::vector<Matrix> factors;

  Shape shape() const;
  Shape ranks() const { return core.shape(); }
};

void validate(const TuckerFactorization& t);
Tensor tucker_to_dense(const TuckerFactorization& t);

}  // namespace tks
