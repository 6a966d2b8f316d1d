#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "tucksketch/drm.hpp"
#include "tucksketch/error.hpp"
#include "tucksketch/rng.hpp"

using namespace tks;
using testutil::random_matrix;
using testutil::rel_diff;

namespace {

DrmSpec spec(DrmKind kind, Index in, Index out, std::uint64_t seed) {
  DrmSpec s;
  s.kind = kind;
  s.in_dim = in;
  s.out_dim = out;
  s.seed = seed;
  return s;
}

DrmSpec trp_spec(std::vector<Index> extents, Index out, std::uint64_t seed) {
  DrmSpec s = spec(DrmKind::trp, shape_product(extents), out, seed);
  s.trp_extents = std::move(extents);
  return s;
}

}  // namespace

TEST_CASE("rng streams are fixed functions of key and counter") {
  // Frozen outputs; changing them breaks every stored sketch file.
  CHECK(rng::mix64(0) == 0);
  CHECK(rng::bits(0, 0) == 0xe220a8397b1dcdafULL);
  CHECK(rng::bits(42, 7) == rng::bits(42, 7));
  CHECK(rng::bits(42, 7) != rng::bits(43, 7));
  const auto p = rng::permutation(5, 20);
  std::set<std::int64_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 20);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 19);
  rng::Stream s(9);
  for (int i = 0; i < 1000; ++i) CHECK(s.next_below(7) < 7);
}

TEST_CASE("regenerating a spec gives an identical map") {
  for (DrmKind kind : {DrmKind::gaussian, DrmKind::sparse_sign, DrmKind::ssrft}) {
    const DrmSpec s = spec(kind, 30, 7, 11);
    const DrmInstance a = make_drm(s), b = make_drm(s);
    CHECK(a == b);
    CHECK(materialize(a) == materialize(b));
    CHECK(!(a == make_drm(spec(kind, 30, 7, 12))));
  }
  const DrmInstance t1 = make_drm(trp_spec({3, 4, 5}, 6, 3)), t2 = make_drm(trp_spec({3, 4, 5}, 6, 3));
  CHECK(t1 == t2);
}

TEST_CASE("gaussian moments") {
  const Matrix g = materialize(make_drm(spec(DrmKind::gaussian, 10000, 1, 2024)));
  const double mean = g.mean();
  const double var = (g.array() - mean).square().sum() / (g.size() - 1);
  CHECK(std::abs(mean) <= 5.0 / std::sqrt(10000.0));
  CHECK(std::abs(var - 1.0) <= 0.1);
}

TEST_CASE("gaussian columns are prefix-consistent") {
  const Matrix a = materialize(make_drm(spec(DrmKind::gaussian, 20, 3, 5)));
  const Matrix b = materialize(make_drm(spec(DrmKind::gaussian, 20, 6, 5)));
  CHECK(b.leftCols(3) == a);
}

TEST_CASE("sparse sign entries") {
  DrmSpec s = spec(DrmKind::sparse_sign, 1000, 10, 8);
  s.density = 0.1;
  const Matrix m = materialize(make_drm(s));
  const double scale = 1 / std::sqrt(0.1);
  Index nnz = 0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) {
      const double v = m(i, j);
      CHECK((v == 0.0 || std::abs(std::abs(v) - scale) < 1e-15));
      nnz += v != 0.0;
    }
  // Binomial(10000, 0.1): sd 30.
  CHECK(std::abs(nnz - 1000) < 150);
}

TEST_CASE("apply_sketch_right") {
  const DrmInstance g = make_drm(spec(DrmKind::gaussian, 12, 12, 1));
  CHECK(apply_sketch_right(Matrix::Zero(5, 12), g).isZero(0));
  const Matrix m = random_matrix(5, 12, 2);
  const Matrix om = materialize(g);
  CHECK(apply_sketch_right(m, g) == m * om);
  CHECK(rel_diff(apply_sketch_right(3.5 * m, g), 3.5 * apply_sketch_right(m, g)) < 1e-15);
  CHECK_THROWS_AS(apply_sketch_right(random_matrix(5, 11, 3), g), Error);
}

TEST_CASE("TRP materialization is the Khatri-Rao product") {
  SUBCASE("shape") {
    const DrmInstance t = make_drm(trp_spec({3, 4}, 2, 4));
    const Matrix m = materialize(t);
    CHECK(m.rows() == 12);
    CHECK(m.cols() == 2);
  }
  SUBCASE("(2,2), k=3") {
    const DrmInstance t = make_drm(trp_spec({2, 2}, 3, 5));
    const auto a = t.trp_factors();
    REQUIRE(a.size() == 2);
    const Matrix m = materialize(t);
    for (Index c = 0; c < 3; ++c) CHECK(m.col(c) == kronecker(a[0].col(c), a[1].col(c)));
  }
  SUBCASE("implicit application on 5x12") {
    const DrmInstance t = make_drm(trp_spec({3, 4}, 4, 6));
    const Matrix m = random_matrix(5, 12, 7);
    const auto a = t.trp_factors();
    const Matrix explicit_kr = khatri_rao(a[0], a[1]);
    CHECK(rel_diff(apply_sketch_right(m, t), m * explicit_kr) < 1e-12);
    CHECK(rel_diff(t.left_apply(m.transpose()), explicit_kr.transpose() * m.transpose()) < 1e-12);
  }
  SUBCASE("row blocks and slices") {
    const DrmInstance t = make_drm(trp_spec({3, 4, 2}, 5, 8));
    const Matrix full = materialize(t);
    const std::vector<Index> rows{0, 5, 23, 7};
    const Matrix blk = t.row_block(rows);
    for (std::size_t j = 0; j < rows.size(); ++j) CHECK(blk.row(static_cast<Index>(j)) == full.row(rows[j]));
    // Restrict the middle constituent to indices 1..2.
    const DrmInstance s = t.trp_slice(1, 1, 2);
    const Matrix sm = materialize(s);
    CHECK(sm.rows() == 12);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 2; ++j)
        for (Index l = 0; l < 2; ++l)
          CHECK(rel_diff(sm.row((i * 2 + j) * 2 + l), full.row((i * 4 + j + 1) * 2 + l)) < 1e-15);
  }
}

TEST_CASE("SSRFT is a restricted orthogonal transform") {
  SUBCASE("square is orthogonal") {
    const Matrix m = materialize(make_drm(spec(DrmKind::ssrft, 8, 8, 3)));
    CHECK((m.transpose() * m - Matrix::Identity(8, 8)).norm() < 1e-10);
    const Matrix x = random_matrix(8, 1, 4);
    const Matrix y = ssrft_apply(make_drm(spec(DrmKind::ssrft, 8, 8, 3)), x, SsrftSide::rows);
    CHECK(std::abs(y.norm() - x.norm()) < 1e-10);
  }
  SUBCASE("subsampling never increases the norm") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const DrmInstance d = make_drm(spec(DrmKind::ssrft, 37, 9, seed));
      const Matrix x = random_matrix(37, 1, 100 + seed);
      CHECK(ssrft_apply(d, x, SsrftSide::rows).norm() <= x.norm() + 1e-10);
    }
  }
  SUBCASE("rows and cols sides agree") {
    const DrmInstance d = make_drm(spec(DrmKind::ssrft, 16, 5, 9));
    const Matrix m = random_matrix(16, 3, 10);
    CHECK(rel_diff(ssrft_apply(d, m.transpose(), SsrftSide::cols), ssrft_apply(d, m, SsrftSide::rows).transpose()) <
          1e-14);
    CHECK(rel_diff(d.right_apply(m.transpose()), m.transpose() * materialize(d)) < 1e-12);
  }
  SUBCASE("expected energy fraction out/in") {
    Matrix x = Matrix::Zero(64, 1);
    x(0, 0) = 0.6;
    x(10, 0) = 0.8;
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 2000; ++seed)
      sum += ssrft_apply(make_drm(spec(DrmKind::ssrft, 64, 16, seed)), x, SsrftSide::rows).squaredNorm();
    CHECK(std::abs(sum / 2000 - 0.25) <= 0.025);
  }
  CHECK_THROWS_AS(make_drm(spec(DrmKind::ssrft, 8, 9, 0)), Error);
}

TEST_CASE("orthonormal DCT matches the defining sum") {
  const Index n = 7;
  const Matrix x = random_matrix(n, 2, 11);
  const Matrix y = dct_columns(x);
  for (Index c = 0; c < 2; ++c)
    for (Index k = 0; k < n; ++k) {
      double s = 0;
      for (Index j = 0; j < n; ++j) s += x(j, c) * std::cos(M_PI * k * (2 * j + 1) / (2.0 * n));
      s *= std::sqrt((k == 0 ? 1.0 : 2.0) / n);
      CHECK(y(k, c) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("storage accounting") {
  const StorageCost g = drm_storage_cost(spec(DrmKind::gaussian, 1000, 10, 0));
  CHECK(g.scalars == 10000);
  const StorageCost t = drm_storage_cost(trp_spec({100, 100, 100}, 10, 0));
  CHECK(t.scalars == 3000);
  CHECK(t.dense_bound == 1e7);
  DrmSpec sp = spec(DrmKind::sparse_sign, 1000, 10, 0);
  sp.density = 0.1;
  const StorageCost s = drm_storage_cost(sp);
  CHECK(s.scalars == doctest::Approx(1000));
  CHECK(s.dense_bound == 10000);
  CHECK(make_drm(trp_spec({10, 20, 30}, 4, 1)).stored_scalars() == 4 * 60);
}

TEST_CASE("materialize respects its budget") {
  CHECK_THROWS_AS(materialize(make_drm(trp_spec({100, 100, 100}, 10, 0)), 1000), Error);
}

TEST_CASE("E||G1^+ G2 B||^2 = q/(t-q-1) ||B||^2") {
  // t = 15, q = 5, p = 3, B = I_3.
  std::mt19937_64 gen(77);
  std::normal_distribution<double> d;
  const int trials = 2000;
  double sum = 0;
  for (int i = 0; i < trials; ++i) {
    Matrix g1(15, 5), g2(15, 3);
    for (Index j = 0; j < g1.size(); ++j) g1.data()[j] = d(gen);
    for (Index j = 0; j < g2.size(); ++j) g2.data()[j] = d(gen);
    sum += g1.colPivHouseholderQr().solve(g2).squaredNorm();
  }
  const double expect = 5.0 / 9.0 * 3.0;
  CHECK(std::abs(sum / trials - expect) <= 0.1 * expect);
}

TEST_CASE("randomized range finder error bound") {
  // A = U diag(σ) Vᵀ with σ_j = j^{-1}, 60 x 40; k = 5 target, p = 5 oversampling.
  const Index m = 60, n = 40, k = 5, p = 5;
  const Matrix u = testutil::random_orthonormal(m, n, 1), v = testutil::random_orthonormal(n, n, 2);
  Vector sigma(n);
  for (Index j = 0; j < n; ++j) sigma(j) = 1.0 / static_cast<double>(j + 1);
  const Matrix a = u * sigma.asDiagonal() * v.transpose();
  double tail = 0;
  for (Index j = k; j < n; ++j) tail += sigma(j) * sigma(j);
  const double bound = (1.0 + static_cast<double>(k) / (p - 1)) * tail;
  double sum = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const Matrix y = make_drm(spec(DrmKind::gaussian, n, k + p, 1000 + static_cast<std::uint64_t>(t))).right_apply(a);
    Eigen::HouseholderQR<Matrix> qr(y);
    const Matrix q = qr.householderQ() * Matrix::Identity(m, k + p);
    sum += (a - q * (q.transpose() * a)).squaredNorm();
  }
  CHECK(sum / trials <= 1.1 * bound);
}
