#include "tucksketch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tucksketch/error.hpp"

namespace tks {

namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), "tensor order must be at least 1");
  for (Index e : shape) require(e >= 1, "tensor extents must be positive");
}

void check_mode(const Tensor& x, Index mode) {
  require(mode >= 0 && mode < x.order(),
          "mode " + std::to_string(mode) + " out of range for order-" + std::to_string(x.order()) + " tensor");
}

// Sizes of the index blocks before, at and after a mode.
struct Split {
  Index left;
  Index mid;
  Index right;
};

Split split_at(const Shape& shape, Index mode) {
  Split s{1, shape[static_cast<std::size_t>(mode)], 1};
  for (Index m = 0; m < mode; ++m) s.left *= shape[static_cast<std::size_t>(m)];
  for (Index m = mode + 1; m < static_cast<Index>(shape.size()); ++m) s.right *= shape[static_cast<std::size_t>(m)];
  return s;
}

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

template <bool Transposed>
Tensor mode_product_impl(const Tensor& x, Index mode, const Matrix& a) {
  check_mode(x, mode);
  const Index in_ext = Transposed ? a.rows() : a.cols();
  const Index out_ext = Transposed ? a.cols() : a.rows();
  require(in_ext == x.extent(mode), "mode product: matrix has " + std::to_string(in_ext) +
                                        " columns but mode " + std::to_string(mode) + " has extent " +
                                        std::to_string(x.extent(mode)));
  require(out_ext >= 1, "mode product: result extent must be positive");

  Shape out_shape = x.shape();
  out_shape[static_cast<std::size_t>(mode)] = out_ext;
  Tensor out(out_shape);
  const Split s = split_at(x.shape(), mode);
  const double* src = x.data().data();
  double* dst = out.data().data();

  if (s.left == 1) {
    ConstMap in(src, s.mid, s.right);
    MutMap res(dst, out_ext, s.right);
    if constexpr (Transposed) {
      res.noalias() = a.transpose() * in;
    } else {
      res.noalias() = a * in;
    }
    return out;
  }
  for (Index r = 0; r < s.right; ++r) {
    ConstMap in(src + r * s.left * s.mid, s.left, s.mid);
    MutMap res(dst + r * s.left * out_ext, s.left, out_ext);
    if constexpr (Transposed) {
      res.noalias() = in * a;
    } else {
      res.noalias() = in * a.transpose();
    }
  }
  return out;
}

}  // namespace

Index shape_product(std::span<const Index> shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(static_cast<std::size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  require(static_cast<Index>(data_.size()) == shape_product(shape_),
          "tensor data length " + std::to_string(data_.size()) + " does not match shape product " +
              std::to_string(shape_product(shape_)));
}

Index Tensor::linear_index(std::span<const Index> idx) const {
  require(idx.size() == shape_.size(), "index has wrong number of modes");
  Index lin = 0;
  Index stride = 1;
  for (std::size_t m = 0; m < shape_.size(); ++m) {
    require(idx[m] >= 0 && idx[m] < shape_[m], "tensor index out of range");
    lin += idx[m] * stride;
    stride *= shape_[m];
  }
  return lin;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require(shape_ == other.shape_, "tensor shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require(shape_ == other.shape_, "tensor shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double alpha) {
  for (double& v : data_) v *= alpha;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double alpha, Tensor a) { return a *= alpha; }

Tensor matrix_to_tensor(const Matrix& m) {
  return Tensor({m.rows(), m.cols()}, std::vector<double>(m.data(), m.data() + m.size()));
}

Matrix tensor_to_matrix(const Tensor& t) {
  require(t.order() == 2, "expected an order-2 tensor");
  return ConstMap(t.data().data(), t.extent(0), t.extent(1));
}

Matrix unfold(const Tensor& x, Index mode) {
  check_mode(x, mode);
  const Split s = split_at(x.shape(), mode);
  Matrix m(s.mid, s.left * s.right);
  const double* src = x.data().data();
  for (Index r = 0; r < s.right; ++r) {
    for (Index i = 0; i < s.mid; ++i) {
      const double* block = src + (r * s.mid + i) * s.left;
      for (Index l = 0; l < s.left; ++l) m(i, l + s.left * r) = block[l];
    }
  }
  return m;
}

Tensor fold(const Matrix& m, Index mode, const Shape& shape) {
  Tensor out(shape);
  check_mode(out, mode);
  const Split s = split_at(shape, mode);
  require(m.rows() == s.mid && m.cols() == s.left * s.right,
          "fold: matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
              std::to_string(s.mid) + "x" + std::to_string(s.left * s.right));
  double* dst = out.data().data();
  for (Index r = 0; r < s.right; ++r) {
    for (Index i = 0; i < s.mid; ++i) {
      double* block = dst + (r * s.mid + i) * s.left;
      for (Index l = 0; l < s.left; ++l) block[l] = m(i, l + s.left * r);
    }
  }
  return out;
}

Tensor mode_product(const Tensor& x, Index mode, const Matrix& a) { return mode_product_impl<false>(x, mode, a); }

Tensor mode_product_transposed(const Tensor& x, Index mode, const Matrix& a) {
  return mode_product_impl<true>(x, mode, a);
}

Tensor multi_mode_product(const Tensor& x, std::span<const ModeMatrix> mats) {
  std::vector<bool> seen(static_cast<std::size_t>(x.order()), false);
  for (const auto& mm : mats) {
    check_mode(x, mm.mode);
    require(!seen[static_cast<std::size_t>(mm.mode)], "duplicate mode " + std::to_string(mm.mode) + " in multi-mode product");
    seen[static_cast<std::size_t>(mm.mode)] = true;
  }
  Tensor y = x;
  for (const auto& mm : mats) y = mode_product(y, mm.mode, mm.matrix);
  return y;
}

double inner(const Tensor& x, const Tensor& y) {
  require(x.shape() == y.shape(), "inner product: tensor shapes differ");
  const auto a = x.data();
  const auto b = y.data();
  return Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size()))
      .dot(Eigen::Map<const Vector>(b.data(), static_cast<Index>(b.size())));
}

double fro_norm(const Tensor& x) {
  const auto a = x.data();
  return Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size())).norm();
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "Khatri-Rao product needs equal column counts (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.cols()) + ")");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Index c = 0; c < a.cols(); ++c)
    for (Index i = 0; i < a.rows(); ++i) out.col(c).segment(i * b.rows(), b.rows()) = a(i, c) * b.col(c);
  return out;
}

Tensor superdiag(std::span<const double> values, Index order) {
  require(order >= 2, "superdiag needs order >= 2");
  require(!values.empty(), "superdiag needs at least one value");
  const auto n = static_cast<Index>(values.size());
  Tensor out(Shape(static_cast<std::size_t>(order), n));
  // Stride between consecutive diagonal entries: 1 + n + n^2 + ...
  Index step = 0;
  Index p = 1;
  for (Index m = 0; m < order; ++m, p *= n) step += p;
  for (Index i = 0; i < n; ++i) out.data()[static_cast<std::size_t>(i * step)] = values[static_cast<std::size_t>(i)];
  return out;
}

Vector contract_all_but(const Tensor& x, Index keep, std::span<const Vector> vecs) {
  check_mode(x, keep);
  require(static_cast<Index>(vecs.size()) == x.order(), "contract_all_but: need one vector slot per mode");
  if (x.order() == 1) return Eigen::Map<const Vector>(x.data().data(), x.size());
  const Tensor* cur = &x;
  Tensor y;
  for (Index m = x.order() - 1; m >= 0; --m) {
    if (m == keep) continue;
    const Vector& v = vecs[static_cast<std::size_t>(m)];
    y = mode_product_transposed(*cur, m, Matrix(v));
    cur = &y;
  }
  return Eigen::Map<const Vector>(y.data().data(), y.size());
}

Shape TuckerFactorization::shape() const {
  Shape s;
  s.reserve(factors.size());
  for (const auto& f : factors) s.push_back(f.rows());
  return s;
}

void validate(const TuckerFactorization& t) {
  require(static_cast<Index>(t.factors.size()) == t.core.order(),
          "Tucker factorization: " + std::to_string(t.factors.size()) + " factors for an order-" +
              std::to_string(t.core.order()) + " core");
  for (Index n = 0; n < t.core.order(); ++n) {
    const Matrix& f = t.factors[static_cast<std::size_t>(n)];
    require(f.cols() == t.core.extent(n), "Tucker factorization: factor " + std::to_string(n) + " has " +
                                              std::to_string(f.cols()) + " columns, core extent is " +
                                              std::to_string(t.core.extent(n)));
    require(f.rows() >= 1, "Tucker factorization: empty factor");
  }
}

Tensor tucker_to_dense(const TuckerFactorization& t) {
  validate(t);
  Tensor y = t.core;
  for (Index n = 0; n < t.core.order(); ++n) y = mode_product(y, n, t.factors[static_cast<std::size_t>(n)]);
  return y;
}

}  // namespace tks
