#include "tucksketch/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "tucksketch/error.hpp"

namespace tks {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

Tensor contract_all(const Tensor& x, std::span<const Matrix> factors, Index skip = -1) {
  const Tensor* cur = &x;
  Tensor y;
  for (Index n = 0; n < x.order(); ++n) {
    if (n == skip) continue;
    y = mode_product_transposed(*cur, n, factors[sz(n)]);
    cur = &y;
  }
  return cur == &x ? x : y;
}

void check_rank(const Shape& shape, const std::vector<Index>& rank) {
  if (rank.size() != shape.size())
    fail(ErrorCode::rank_infeasible, "target rank needs one entry per mode (" + std::to_string(shape.size()) + ")");
  for (std::size_t n = 0; n < shape.size(); ++n)
    if (rank[n] < 1 || rank[n] > shape[n])
      fail(ErrorCode::rank_infeasible, "mode " + std::to_string(n) + ": rank " + std::to_string(rank[n]) +
                                           " is outside [1, " + std::to_string(shape[n]) + "]");
}

double squared_norm(const Tensor& x) {
  const double n = fro_norm(x);
  return n * n;
}

}  // namespace

Matrix orthonormal_basis(const Matrix& v, bool* completed) {
  const Index rows = v.rows();
  const Index k = v.cols();
  require(k <= rows, "orthonormal_basis: more columns than rows");
  const double norm = v.norm();
  Index rank = 0;
  Matrix q(rows, k);
  if (norm > 0.0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(v);
    const auto& r = qr.matrixQR();
    while (rank < k && std::abs(r(rank, rank)) > kRankTolerance * norm) ++rank;
    q.leftCols(rank) = qr.householderQ() * Matrix::Identity(rows, rank);
  }
  if (completed != nullptr) *completed = rank < k;
  // Fill the remaining columns with canonical vectors orthogonalized against
  // the basis (two Gram-Schmidt passes).
  for (Index j = 0; rank < k && j < rows; ++j) {
    Vector e = Vector::Unit(rows, j);
    for (int pass = 0; pass < 2; ++pass) e -= q.leftCols(rank) * (q.leftCols(rank).transpose() * e);
    const double en = e.norm();
    if (en > 0.5) q.col(rank++) = e / en;
  }
  return q;
}

FactorBases factor_bases(const TuckerSketch& sk) {
  FactorBases b;
  for (std::size_t n = 0; n < sk.factor_sketches.size(); ++n) {
    bool completed = false;
    b.q.push_back(orthonormal_basis(sk.factor_sketches[n], &completed));
    if (completed) b.completed_modes.push_back(static_cast<Index>(n));
  }
  return b;
}

RecoveryReport two_pass_recover(const Tensor& x, const TuckerSketch& sk) {
  require(x.shape() == sk.shape, "two-pass recovery: tensor shape differs from the sketched shape");
  FactorBases bases = factor_bases(sk);
  RecoveryReport report;
  report.passes = 2;
  report.factorization.core = contract_all(x, bases.q);
  report.factorization.factors = std::move(bases.q);
  report.completed_modes = std::move(bases.completed_modes);
  return report;
}

Tensor solve_core(const Tensor& h, std::span<const Matrix> b, std::vector<double>* residuals) {
  require(static_cast<Index>(b.size()) == h.order(), "solve_core: need one matrix per mode");
  Tensor y = h;
  for (Index n = 0; n < h.order(); ++n) {
    const Matrix& bn = b[sz(n)];
    require(bn.rows() == y.extent(n), "solve_core: mode " + std::to_string(n) + " matrix has " +
                                          std::to_string(bn.rows()) + " rows, core sketch extent is " +
                                          std::to_string(y.extent(n)));
    const Index k = bn.cols();
    if (k > bn.rows())
      fail(ErrorCode::rank_infeasible, "mode " + std::to_string(n) + ": core sketch size s=" +
                                           std::to_string(bn.rows()) + " is smaller than k=" + std::to_string(k));
    Eigen::ColPivHouseholderQR<Matrix> qr(bn);
    const double first = std::abs(qr.matrixQR()(0, 0));
    const double last = std::abs(qr.matrixQR()(k - 1, k - 1));
    if (!(first > 0.0) || last * kMaxCondition < first) {
      std::ostringstream msg;
      msg << "mode " << n << ": Phi^T Q is numerically rank deficient (condition estimate "
          << (last > 0.0 ? first / last : INFINITY) << "); increase s or change the seed";
      fail(ErrorCode::rank_infeasible, msg.str());
    }
    const Matrix rhs = unfold(y, n);
    Matrix sol = qr.solve(rhs);
    if (residuals != nullptr) residuals->push_back((bn * sol - rhs).norm());
    Shape shape = y.shape();
    shape[sz(n)] = k;
    y = fold(sol, n, shape);
  }
  return y;
}

RecoveryReport one_pass_recover(const TuckerSketch& sk) {
  FactorBases bases = factor_bases(sk);
  std::vector<Matrix> b;
  for (Index n = 0; n < static_cast<Index>(sk.shape.size()); ++n) {
    const DrmInstance phi(phi_spec(sk.shape, sk.params, n));
    b.push_back(phi.left_apply(bases.q[sz(n)]));
  }
  RecoveryReport report;
  report.passes = 1;
  report.factorization.core = solve_core(sk.core_sketch, b, &report.core_solver_residuals);
  report.factorization.factors = std::move(bases.q);
  report.completed_modes = std::move(bases.completed_modes);
  return report;
}

Matrix leading_left_singular_vectors(const Matrix& m, Index r) {
  require(r >= 1 && r <= m.rows(), "requested " + std::to_string(r) + " singular vectors of a matrix with " +
                                       std::to_string(m.rows()) + " rows");
  const bool full = r > std::min(m.rows(), m.cols());
  Eigen::BDCSVD<Matrix> svd(m, full ? Eigen::ComputeFullU : Eigen::ComputeThinU);
  Matrix u = svd.matrixU().leftCols(r);
  for (Index c = 0; c < r; ++c) {
    Index imax = 0;
    u.col(c).cwiseAbs().maxCoeff(&imax);
    if (u(imax, c) < 0) u.col(c) *= -1.0;
  }
  return u;
}

TuckerFactorization hosvd(const Tensor& x, const std::vector<Index>& rank) {
  check_rank(x.shape(), rank);
  TuckerFactorization t;
  for (Index n = 0; n < x.order(); ++n) t.factors.push_back(leading_left_singular_vectors(unfold(x, n), rank[sz(n)]));
  t.core = contract_all(x, t.factors);
  return t;
}

TuckerFactorization st_hosvd(const Tensor& x, const std::vector<Index>& rank) {
  check_rank(x.shape(), rank);
  TuckerFactorization t;
  Tensor y = x;
  for (Index n = 0; n < x.order(); ++n) {
    t.factors.push_back(leading_left_singular_vectors(unfold(y, n), rank[sz(n)]));
    y = mode_product_transposed(y, n, t.factors.back());
  }
  t.core = std::move(y);
  return t;
}

HooiResult hooi(const Tensor& x, const std::vector<Index>& rank, const HooiOptions& options) {
  HooiResult res;
  res.factorization = hosvd(x, rank);
  auto& f = res.factorization;
  const double x2 = squared_norm(x);
  auto objective = [&] { return x2 > 0.0 ? (x2 - squared_norm(f.core)) / x2 : 0.0; };
  res.objective.push_back(objective());
  for (int it = 0; it < options.max_iters; ++it) {
    for (Index n = 0; n < x.order(); ++n) {
      const Tensor y = contract_all(x, f.factors, n);
      f.factors[sz(n)] = leading_left_singular_vectors(unfold(y, n), rank[sz(n)]);
    }
    f.core = contract_all(x, f.factors);
    const double prev = res.objective.back();
    const double cur = objective();
    res.objective.push_back(cur);
    res.iterations = it + 1;
    if (prev <= 0.0 || std::abs(prev - cur) <= options.tol * std::abs(prev)) break;
  }
  return res;
}

TuckerFactorization fixed_rank_truncate(const TuckerFactorization& t, const std::vector<Index>& rank,
                                        TruncationMethod method, const HooiOptions& options, int* iterations) {
  validate(t);
  check_rank(t.core.shape(), rank);
  TuckerFactorization small;
  if (method == TruncationMethod::hooi) {
    HooiResult h = hooi(t.core, rank, options);
    if (iterations != nullptr) *iterations = h.iterations;
    small = std::move(h.factorization);
  } else {
    small = st_hosvd(t.core, rank);
    if (iterations != nullptr) *iterations = 0;
  }
  TuckerFactorization out;
  out.core = std::move(small.core);
  for (std::size_t n = 0; n < t.factors.size(); ++n) out.factors.push_back(t.factors[n] * small.factors[n]);
  return out;
}

}  // namespace tks
