#pragma once

// Shared helpers for the test binaries. Random inputs come from the standard
// library generators so they are independent of the library's own RNG.

#include <algorithm>
#include <cmath>
#include <random>

#include "tucksketch/tensor.hpp"

namespace testutil {

using tks::Index;
using tks::Matrix;
using tks::Shape;
using tks::Tensor;

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  Tensor t(shape);
  for (double& v : t.data()) v = d(gen);
  return t;
}

inline Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(gen);
  return m;
}

inline Matrix random_orthonormal(Index rows, Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rows, cols, seed));
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline double rel_diff(const Tensor& a, const Tensor& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    num += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    den += b.data()[i] * b.data()[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Exact-rank tensor ⟦C; A_0, ..., A_{N-1}⟧ with orthonormal A_n.
inline tks::TuckerFactorization random_tucker(const Shape& shape, const Shape& rank, std::uint64_t seed) {
  tks::TuckerFactorization t;
  t.core = random_tensor(rank, seed);
  for (std::size_t n = 0; n < shape.size(); ++n)
    t.factors.push_back(random_orthonormal(shape[n], rank[n], seed * 31 + n + 1));
  return t;
}

// Advances a multi-index over `shape`, first index fastest. False at wrap.
inline bool next_index(std::vector<Index>& idx, const Shape& shape) {
  for (std::size_t m = 0; m < shape.size(); ++m) {
    if (++idx[m] < shape[m]) return true;
    idx[m] = 0;
  }
  return false;
}

}  // namespace testutil
