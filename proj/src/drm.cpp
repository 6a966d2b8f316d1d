#include "tucksketch/drm.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <string>

#include <fftw3.h>

#include "tucksketch/error.hpp"
#include "tucksketch/rng.hpp"

namespace tks {

namespace {

// Sub-stream tags for the SSRFT state.
enum : std::uint64_t { kSsrftCoords = 1, kSsrftPerm1 = 2, kSsrftPerm2 = 3, kSsrftSign1 = 4, kSsrftSign2 = 5 };

Matrix random_dense(DrmKind kind, Index rows, Index cols, std::uint64_t key, double density) {
  Matrix m(rows, cols);
  if (kind == DrmKind::gaussian) {
    for (Index c = 0; c < cols; ++c)
      for (Index i = 0; i < rows; ++i) m(i, c) = rng::normal(key, static_cast<std::uint64_t>(c * rows + i));
  } else {
    const double scale = 1.0 / std::sqrt(density);
    for (Index c = 0; c < cols; ++c) {
      for (Index i = 0; i < rows; ++i) {
        const auto t = static_cast<std::uint64_t>(c * rows + i);
        if (rng::uniform(key, 2 * t) < density) {
          m(i, c) = (rng::bits(key, 2 * t + 1) & 1U) ? scale : -scale;
        } else {
          m(i, c) = 0.0;
        }
      }
    }
  }
  return m;
}

std::vector<double> random_signs(std::uint64_t key, Index n) {
  std::vector<double> s(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = (rng::bits(key, static_cast<std::uint64_t>(i)) >> 63) ? 1.0 : -1.0;
  return s;
}

std::uint64_t trp_seed(const DrmSpec& spec, std::size_t q) {
  return spec.trp_seeds.empty() ? rng::derive_seed(spec.seed, q) : spec.trp_seeds[q];
}

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

std::string_view to_string(DrmKind kind) {
  switch (kind) {
    case DrmKind::gaussian:
      return "gaussian";
    case DrmKind::sparse_sign:
      return "sparse";
    case DrmKind::ssrft:
      return "ssrft";
    case DrmKind::trp:
      return "trp";
  }
  return "unknown";
}

DrmKind parse_drm_kind(std::string_view name) {
  if (name == "gaussian") return DrmKind::gaussian;
  if (name == "sparse" || name == "sparse_sign") return DrmKind::sparse_sign;
  if (name == "ssrft") return DrmKind::ssrft;
  if (name == "trp") return DrmKind::trp;
  fail(ErrorCode::invalid_argument, "unknown DRM kind '" + std::string(name) + "'");
}

void validate(const DrmSpec& spec) {
  require(spec.in_dim >= 1 && spec.out_dim >= 1, "DRM dimensions must be positive");
  switch (spec.kind) {
    case DrmKind::gaussian:
      break;
    case DrmKind::sparse_sign:
      require(spec.density > 0.0 && spec.density <= 1.0, "sparse DRM density must be in (0, 1]");
      break;
    case DrmKind::ssrft:
      require(spec.out_dim <= spec.in_dim, "SSRFT output dimension " + std::to_string(spec.out_dim) +
                                               " exceeds input dimension " + std::to_string(spec.in_dim));
      break;
    case DrmKind::trp:
      require(!spec.trp_extents.empty(), "TRP needs at least one constituent extent");
      require(shape_product(spec.trp_extents) == spec.in_dim, "TRP extents must multiply to the input dimension");
      for (Index e : spec.trp_extents) require(e >= 1, "TRP extents must be positive");
      require(spec.trp_seeds.empty() || spec.trp_seeds.size() == spec.trp_extents.size(),
              "TRP needs one seed per constituent");
      require(spec.trp_constituent == DrmKind::gaussian || spec.trp_constituent == DrmKind::sparse_sign,
              "TRP constituents must be gaussian or sparse");
      if (spec.trp_constituent == DrmKind::sparse_sign)
        require(spec.density > 0.0 && spec.density <= 1.0, "sparse DRM density must be in (0, 1]");
      break;
  }
}

StorageCost drm_storage_cost(const DrmSpec& spec) {
  validate(spec);
  const double dense = static_cast<double>(spec.in_dim) * static_cast<double>(spec.out_dim);
  StorageCost cost{dense, dense};
  switch (spec.kind) {
    case DrmKind::gaussian:
      break;
    case DrmKind::sparse_sign:
      cost.scalars = spec.density * dense;
      break;
    case DrmKind::ssrft:
      // Two permutations, two sign vectors and the kept coordinates.
      cost.scalars = 4.0 * static_cast<double>(spec.in_dim) + static_cast<double>(spec.out_dim);
      break;
    case DrmKind::trp:
      cost.scalars = 0;
      for (Index e : spec.trp_extents) cost.scalars += static_cast<double>(e) * static_cast<double>(spec.out_dim);
      break;
  }
  return cost;
}

DrmInstance::DrmInstance(DrmSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  switch (spec_.kind) {
    case DrmKind::gaussian:
    case DrmKind::sparse_sign:
      state_ = random_dense(spec_.kind, spec_.in_dim, spec_.out_dim, spec_.seed, spec_.density);
      break;
    case DrmKind::ssrft: {
      Ssrft s;
      s.coords = rng::sample_without_replacement(rng::derive_seed(spec_.seed, kSsrftCoords), spec_.in_dim, spec_.out_dim);
      s.perm1 = rng::permutation(rng::derive_seed(spec_.seed, kSsrftPerm1), spec_.in_dim);
      s.perm2 = rng::permutation(rng::derive_seed(spec_.seed, kSsrftPerm2), spec_.in_dim);
      s.sign1 = random_signs(rng::derive_seed(spec_.seed, kSsrftSign1), spec_.in_dim);
      s.sign2 = random_signs(rng::derive_seed(spec_.seed, kSsrftSign2), spec_.in_dim);
      state_ = std::move(s);
      break;
    }
    case DrmKind::trp: {
      Trp t;
      for (std::size_t q = 0; q < spec_.trp_extents.size(); ++q)
        t.factors.push_back(random_dense(spec_.trp_constituent, spec_.trp_extents[q], spec_.out_dim, trp_seed(spec_, q),
                                         spec_.density));
      state_ = std::move(t);
      break;
    }
  }
}

DrmInstance::DrmInstance(DrmSpec spec, Trp trp) : spec_(std::move(spec)), state_(std::move(trp)) {}

DrmInstance make_drm(const DrmSpec& spec) { return DrmInstance(spec); }

const Matrix* DrmInstance::dense() const noexcept { return std::get_if<Matrix>(&state_); }

std::span<const Matrix> DrmInstance::trp_factors() const noexcept {
  if (const auto* t = std::get_if<Trp>(&state_)) return t->factors;
  return {};
}

Index DrmInstance::stored_scalars() const noexcept {
  if (const auto* m = std::get_if<Matrix>(&state_)) return m->size();
  if (const auto* s = std::get_if<Ssrft>(&state_))
    return static_cast<Index>(s->coords.size() + s->perm1.size() + s->perm2.size() + s->sign1.size() + s->sign2.size());
  Index n = 0;
  for (const auto& a : std::get<Trp>(state_).factors) n += a.size();
  return n;
}

bool operator==(const DrmInstance& a, const DrmInstance& b) {
  if (!(a.spec_ == b.spec_) || a.state_.index() != b.state_.index()) return false;
  if (const auto* m = std::get_if<Matrix>(&a.state_)) {
    const Matrix& n = std::get<Matrix>(b.state_);
    return m->rows() == n.rows() && m->cols() == n.cols() && *m == n;
  }
  if (const auto* s = std::get_if<DrmInstance::Ssrft>(&a.state_)) return *s == std::get<DrmInstance::Ssrft>(b.state_);
  const auto& fa = std::get<DrmInstance::Trp>(a.state_).factors;
  const auto& fb = std::get<DrmInstance::Trp>(b.state_).factors;
  if (fa.size() != fb.size()) return false;
  for (std::size_t q = 0; q < fa.size(); ++q)
    if (fa[q].rows() != fb[q].rows() || fa[q].cols() != fb[q].cols() || fa[q] != fb[q]) return false;
  return true;
}

Matrix dct_columns(const Matrix& m) {
  const Index n = m.rows();
  Matrix out(n, m.cols());
  if (m.size() == 0) return out;
  Matrix in = m;  // FFTW wants a mutable input pointer.
  const int len = static_cast<int>(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_r2r_kind kind = FFTW_REDFT10;
    plan = fftw_plan_many_r2r(1, &len, static_cast<int>(m.cols()), in.data(), nullptr, 1, len, out.data(), nullptr, 1,
                              len, &kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  if (plan == nullptr) fail(ErrorCode::internal, "FFTW could not plan a DCT of length " + std::to_string(n));
  fftw_execute_r2r(plan, in.data(), out.data());
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  // REDFT10 is 2 * unnormalized DCT-II.
  const double s0 = std::sqrt(1.0 / (4.0 * static_cast<double>(n)));
  const double s = std::sqrt(1.0 / (2.0 * static_cast<double>(n)));
  out.row(0) *= s0;
  if (n > 1) out.bottomRows(n - 1) *= s;
  return out;
}

Matrix DrmInstance::ssrft_rows(const Matrix& m) const {
  const auto& st = std::get<Ssrft>(state_);
  const Index n = spec_.in_dim;
  Matrix y(n, m.cols());
  for (Index i = 0; i < n; ++i) y.row(i) = st.sign1[static_cast<std::size_t>(i)] * m.row(st.perm1[static_cast<std::size_t>(i)]);
  y = dct_columns(y);
  Matrix z(n, m.cols());
  for (Index i = 0; i < n; ++i) z.row(i) = st.sign2[static_cast<std::size_t>(i)] * y.row(st.perm2[static_cast<std::size_t>(i)]);
  z = dct_columns(z);
  Matrix out(spec_.out_dim, m.cols());
  for (Index i = 0; i < spec_.out_dim; ++i) out.row(i) = z.row(st.coords[static_cast<std::size_t>(i)]);
  return out;
}

Matrix DrmInstance::trp_right_apply(const Matrix& m) const {
  const auto& factors = std::get<Trp>(state_).factors;
  const auto p = static_cast<Index>(factors.size());
  // Column-major m is a first-index-fastest tensor (rows, e_p, ..., e_1).
  Shape shape{m.rows()};
  for (Index q = p - 1; q >= 0; --q) shape.push_back(factors[static_cast<std::size_t>(q)].rows());
  const Tensor view(shape, std::vector<double>(m.data(), m.data() + m.size()));
  Matrix out(m.rows(), spec_.out_dim);
  std::vector<Vector> vecs(static_cast<std::size_t>(p + 1));
  for (Index c = 0; c < spec_.out_dim; ++c) {
    for (Index t = 1; t <= p; ++t) vecs[static_cast<std::size_t>(t)] = factors[static_cast<std::size_t>(p - t)].col(c);
    out.col(c) = contract_all_but(view, 0, vecs);
  }
  return out;
}

namespace {
thread_local Index g_trp_explicit_peak = 0;
}

Index trp_explicit_peak() { return g_trp_explicit_peak; }
void reset_trp_explicit_peak() { g_trp_explicit_peak = 0; }

Matrix DrmInstance::trp_rows(std::span<const Index> rows) const {
  const auto& factors = std::get<Trp>(state_).factors;
  g_trp_explicit_peak = std::max(g_trp_explicit_peak, static_cast<Index>(rows.size()) * spec_.out_dim);
  Matrix out(static_cast<Index>(rows.size()), spec_.out_dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Index g = rows[r];
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(spec_.out_dim);
    for (auto q = static_cast<Index>(factors.size()) - 1; q >= 0; --q) {
      const Matrix& a = factors[static_cast<std::size_t>(q)];
      row.array() *= a.row(g % a.rows()).array();
      g /= a.rows();
    }
    out.row(static_cast<Index>(r)) = row;
  }
  return out;
}

Matrix DrmInstance::right_apply(const Matrix& m) const {
  require(m.cols() == spec_.in_dim, "sketch: matrix has " + std::to_string(m.cols()) +
                                        " columns, DRM input dimension is " + std::to_string(spec_.in_dim));
  if (const auto* d = dense()) return m * *d;
  if (spec_.kind == DrmKind::ssrft) return ssrft_rows(m.transpose()).transpose();
  return trp_right_apply(m);
}

Matrix DrmInstance::left_apply(const Matrix& m) const {
  require(m.rows() == spec_.in_dim, "sketch: matrix has " + std::to_string(m.rows()) +
                                        " rows, DRM input dimension is " + std::to_string(spec_.in_dim));
  if (const auto* d = dense()) return d->transpose() * m;
  if (spec_.kind == DrmKind::ssrft) return ssrft_rows(m);
  return trp_right_apply(m.transpose()).transpose();
}

Matrix DrmInstance::row_block(std::span<const Index> rows) const {
  for (Index g : rows) require(g >= 0 && g < spec_.in_dim, "DRM row index out of range");
  if (const auto* d = dense()) {
    Matrix sub(static_cast<Index>(rows.size()), spec_.out_dim);
    for (std::size_t j = 0; j < rows.size(); ++j) sub.row(static_cast<Index>(j)) = d->row(rows[j]);
    return sub;
  }
  if (spec_.kind == DrmKind::trp) return trp_rows(rows);
  Matrix select = Matrix::Zero(spec_.in_dim, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) select(rows[j], static_cast<Index>(j)) = 1.0;
  return ssrft_rows(select).transpose();
}

Matrix DrmInstance::right_apply_rows(const Matrix& m, std::span<const Index> rows) const {
  require(m.cols() == static_cast<Index>(rows.size()), "row-restricted sketch: column count does not match index list");
  for (Index g : rows) require(g >= 0 && g < spec_.in_dim, "DRM row index out of range");
  if (spec_.kind != DrmKind::ssrft) return m * row_block(rows);
  // The SSRFT mixes all coordinates; embed into the full input space.
  Matrix full = Matrix::Zero(m.rows(), spec_.in_dim);
  for (std::size_t j = 0; j < rows.size(); ++j) full.col(rows[j]) = m.col(static_cast<Index>(j));
  return right_apply(full);
}

Matrix DrmInstance::left_apply_rows(const Matrix& m, std::span<const Index> rows) const {
  return right_apply_rows(m.transpose(), rows).transpose();
}

DrmInstance DrmInstance::trp_slice(Index position, Index offset, Index extent) const {
  const auto* t = std::get_if<Trp>(&state_);
  require(t != nullptr, "trp_slice needs a TRP map");
  require(position >= 0 && position < static_cast<Index>(t->factors.size()), "TRP constituent position out of range");
  const Matrix& a = t->factors[static_cast<std::size_t>(position)];
  require(offset >= 0 && extent >= 1 && offset + extent <= a.rows(), "TRP slice out of range");
  DrmSpec spec = spec_;
  spec.trp_extents[static_cast<std::size_t>(position)] = extent;
  spec.in_dim = shape_product(spec.trp_extents);
  Trp sliced = *t;
  sliced.factors[static_cast<std::size_t>(position)] = a.middleRows(offset, extent);
  return DrmInstance(std::move(spec), std::move(sliced));
}

Matrix apply_sketch_right(const Matrix& m, const DrmInstance& drm) { return drm.right_apply(m); }

Matrix ssrft_apply(const DrmInstance& drm, const Matrix& m, SsrftSide side) {
  require(drm.spec().kind == DrmKind::ssrft, "ssrft_apply needs an SSRFT map");
  return side == SsrftSide::rows ? drm.left_apply(m) : drm.right_apply(m);
}

Matrix materialize(const DrmInstance& drm, Index max_scalars) {
  require(drm.in_dim() <= max_scalars / drm.out_dim(),
          "materializing a " + std::to_string(drm.in_dim()) + "x" + std::to_string(drm.out_dim()) +
              " DRM exceeds the budget of " + std::to_string(max_scalars) + " scalars");
  if (const auto* d = drm.dense()) return *d;
  if (drm.spec().kind == DrmKind::ssrft) return drm.left_apply(Matrix::Identity(drm.in_dim(), drm.in_dim())).transpose();
  std::vector<Index> all(static_cast<std::size_t>(drm.in_dim()));
  std::iota(all.begin(), all.end(), Index{0});
  return drm.row_block(all);
}

}  // namespace tks
