#include "tucksketch/sketch.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tucksketch/error.hpp"
#include "tucksketch/rng.hpp"

namespace tks {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

// Modes feeding Ω_n, in constituent order (descending, skipping n).
std::vector<Index> trp_modes(Index order, Index n) {
  std::vector<Index> modes;
  for (Index j = order - 1; j >= 0; --j)
    if (j != n) modes.push_back(j);
  return modes;
}

Index position_of(const std::vector<Index>& modes, Index mode) {
  return static_cast<Index>(std::find(modes.begin(), modes.end(), mode) - modes.begin());
}

// x^(n)·Ω_n. For a TRP the product is formed by contracting x directly with
// the constituent columns, without unfolding or materializing Ω_n.
Matrix factor_sketch(const Tensor& x, Index n, const DrmInstance& omega) {
  if (omega.spec().kind != DrmKind::trp) return omega.right_apply(unfold(x, n));
  const auto factors = omega.trp_factors();
  const std::vector<Index> modes = trp_modes(x.order(), n);
  Matrix v(x.extent(n), omega.out_dim());
  std::vector<Vector> vecs(sz(x.order()));
  for (Index c = 0; c < omega.out_dim(); ++c) {
    for (std::size_t q = 0; q < modes.size(); ++q) vecs[sz(modes[q])] = factors[q].col(c);
    v.col(c) = contract_all_but(x, n, vecs);
  }
  return v;
}

// y ×_n Φ[rows, :]ᵀ where `rows` is offset..offset+extent-1 (or all rows).
Tensor contract_phi(const Tensor& y, Index n, const DrmInstance& phi, Index offset) {
  const Index e = y.extent(n);
  if (const Matrix* d = phi.dense()) {
    if (e == phi.in_dim()) return mode_product_transposed(y, n, *d);
    return mode_product_transposed(y, n, d->middleRows(offset, e));
  }
  Shape out_shape = y.shape();
  out_shape[sz(n)] = phi.out_dim();
  if (e == phi.in_dim()) return fold(phi.left_apply(unfold(y, n)), n, out_shape);
  std::vector<Index> rows(sz(e));
  std::iota(rows.begin(), rows.end(), offset);
  return fold(phi.left_apply_rows(unfold(y, n), rows), n, out_shape);
}

Tensor core_sketch_of(const Tensor& x, const SketchMaps& maps, Index slab_mode, Index offset) {
  Tensor y = x;
  for (Index n = 0; n < x.order(); ++n) y = contract_phi(y, n, maps.phi[sz(n)], n == slab_mode ? offset : 0);
  return y;
}

// Columns of the full mode-n unfolding hit by the slab's mode-n unfolding.
std::vector<Index> slab_columns(const Shape& full, const Shape& slab, Index n, Index mode, Index offset) {
  const auto order = static_cast<Index>(full.size());
  std::vector<Index> other;
  for (Index m = 0; m < order; ++m)
    if (m != n) other.push_back(m);
  std::vector<Index> stride(other.size());
  Index st = 1;
  for (std::size_t q = 0; q < other.size(); ++q) {
    stride[q] = st;
    st *= full[sz(other[q])];
  }
  Index count = 1;
  for (Index m : other) count *= slab[sz(m)];
  std::vector<Index> cols(sz(count));
  std::vector<Index> idx(other.size(), 0);
  for (Index j = 0; j < count; ++j) {
    Index g = 0;
    for (std::size_t q = 0; q < other.size(); ++q) g += (idx[q] + (other[q] == mode ? offset : 0)) * stride[q];
    cols[sz(j)] = g;
    for (std::size_t q = 0; q < other.size(); ++q) {
      if (++idx[q] < slab[sz(other[q])]) break;
      idx[q] = 0;
    }
  }
  return cols;
}

void scale(TuckerSketch& sk, double theta) {
  for (auto& v : sk.factor_sketches) v *= theta;
  sk.core_sketch *= theta;
}

}  // namespace

SketchParams default_params(const std::vector<Index>& rank, std::uint64_t seed) {
  SketchParams p;
  p.master_seed = seed;
  for (Index r : rank) {
    p.k.push_back(2 * r + 1);
    p.s.push_back(2 * (2 * r + 1) + 1);
  }
  return p;
}

std::vector<std::string> validate(const SketchParams& params, const Shape& shape) {
  const auto order = static_cast<Index>(shape.size());
  require(order >= 2, "sketching needs a tensor of order >= 2");
  require(params.k.size() == shape.size() && params.s.size() == shape.size(),
          "sketch sizes k and s need one entry per mode (" + std::to_string(order) + ")");
  require(params.factor_kind != DrmKind::trp || params.trp_constituent == DrmKind::gaussian ||
              params.trp_constituent == DrmKind::sparse_sign,
          "TRP constituents must be gaussian or sparse");
  if (params.factor_kind == DrmKind::sparse_sign || params.core_kind == DrmKind::sparse_sign ||
      params.trp_constituent == DrmKind::sparse_sign)
    require(params.density > 0.0 && params.density <= 1.0, "sparse DRM density must be in (0, 1]");
  std::vector<std::string> warnings;
  const Index total = shape_product(shape);
  for (Index n = 0; n < order; ++n) {
    const Index in = shape[sz(n)];
    const Index k = params.k[sz(n)];
    const Index s = params.s[sz(n)];
    const std::string tag = "mode " + std::to_string(n) + ": ";
    require(in >= 1, tag + "extent must be positive");
    require(k >= 1 && k <= in, tag + "need 1 <= k <= I_n, got k=" + std::to_string(k) + ", I_n=" + std::to_string(in));
    require(s >= k, tag + "need s >= k, got s=" + std::to_string(s) + ", k=" + std::to_string(k));
    if (params.factor_kind == DrmKind::ssrft)
      require(k <= total / in, tag + "SSRFT factor map needs k <= prod_{m != n} I_m");
    if (params.core_kind == DrmKind::ssrft) require(s <= in, tag + "SSRFT core map needs s <= I_n");
    if (s <= 2 * k)
      warnings.push_back(tag + "s=" + std::to_string(s) + " <= 2k=" + std::to_string(2 * k) +
                         "; the one-pass error bound needs s > 2k");
  }
  return warnings;
}

DrmSpec omega_spec(const Shape& shape, const SketchParams& params, Index mode) {
  const auto order = static_cast<Index>(shape.size());
  DrmSpec spec;
  spec.kind = params.factor_kind;
  spec.in_dim = shape_product(shape) / shape[sz(mode)];
  spec.out_dim = params.k[sz(mode)];
  spec.seed = rng::derive_seed(rng::derive_seed(params.master_seed, kRoleOmega), static_cast<std::uint64_t>(mode));
  spec.density = params.density;
  if (spec.kind == DrmKind::trp) {
    const std::uint64_t base = rng::derive_seed(params.master_seed, kRoleTrpFactor);
    for (Index j : trp_modes(order, mode)) {
      spec.trp_extents.push_back(shape[sz(j)]);
      spec.trp_seeds.push_back(rng::derive_seed(base, static_cast<std::uint64_t>(j)));
    }
    spec.trp_constituent = params.trp_constituent;
  }
  return spec;
}

DrmSpec phi_spec(const Shape& shape, const SketchParams& params, Index mode) {
  DrmSpec spec;
  spec.kind = params.core_kind;
  spec.in_dim = shape[sz(mode)];
  spec.out_dim = params.s[sz(mode)];
  spec.seed = rng::derive_seed(rng::derive_seed(params.master_seed, kRolePhi), static_cast<std::uint64_t>(mode));
  spec.density = params.density;
  if (spec.kind == DrmKind::trp) {
    spec.trp_extents = {shape[sz(mode)]};
    spec.trp_constituent = params.trp_constituent;
  }
  return spec;
}

SketchMaps make_sketch_maps(const Shape& shape, const SketchParams& params) {
  validate(params, shape);
  SketchMaps maps;
  for (Index n = 0; n < static_cast<Index>(shape.size()); ++n) {
    maps.omega.emplace_back(omega_spec(shape, params, n));
    maps.phi.emplace_back(phi_spec(shape, params, n));
  }
  return maps;
}

TuckerSketch empty_sketch(const Shape& shape, const SketchParams& params) {
  validate(params, shape);
  TuckerSketch sk{shape, params, {}, Tensor(params.s)};
  for (std::size_t n = 0; n < shape.size(); ++n) sk.factor_sketches.push_back(Matrix::Zero(shape[n], params.k[n]));
  return sk;
}

double core_sketch_flops(const Shape& shape, const std::vector<Index>& s) {
  require(s.size() == shape.size(), "core_sketch_flops: s needs one entry per mode");
  double total = 0;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    double term = static_cast<double>(s[n]);
    for (std::size_t m = 0; m < n; ++m) term *= static_cast<double>(s[m]);
    for (std::size_t m = n; m < shape.size(); ++m) term *= static_cast<double>(shape[m]);
    total += term;
  }
  return total;
}

TuckerSketch tucker_sketch(const Tensor& x, const SketchParams& params) {
  return tucker_sketch(x, params, make_sketch_maps(x.shape(), params));
}

TuckerSketch tucker_sketch(const Tensor& x, const SketchParams& params, const SketchMaps& maps) {
  validate(params, x.shape());
  TuckerSketch sk{x.shape(), params, {}, Tensor()};
  for (Index n = 0; n < x.order(); ++n) sk.factor_sketches.push_back(factor_sketch(x, n, maps.omega[sz(n)]));
  sk.core_sketch = core_sketch_of(x, maps, -1, 0);
  return sk;
}

TuckerSketch sketch_linear_update(const TuckerSketch& sk, const Tensor& f, double theta1, double theta2) {
  require(f.shape() == sk.shape, "linear update: update tensor shape differs from the sketched shape");
  TuckerSketch out = sk;
  scale(out, theta1);
  const TuckerSketch fs = tucker_sketch(f, sk.params);
  for (std::size_t n = 0; n < out.factor_sketches.size(); ++n) out.factor_sketches[n] += theta2 * fs.factor_sketches[n];
  out.core_sketch += theta2 * fs.core_sketch;
  return out;
}

void sketch_slab_update(TuckerSketch& sk, const SketchMaps& maps, Index mode, Index offset, const Tensor& slab,
                        double theta1, double theta2) {
  const auto order = static_cast<Index>(sk.shape.size());
  require(mode >= 0 && mode < order, "slab update: mode out of range");
  require(slab.order() == order, "slab update: slab order differs from the sketched tensor");
  const Index e = slab.extent(mode);
  for (Index m = 0; m < order; ++m)
    if (m != mode)
      require(slab.extent(m) == sk.shape[sz(m)], "slab update: slab extent differs along mode " + std::to_string(m));
  require(offset >= 0 && offset + e <= sk.shape[sz(mode)], "slab update: slab exceeds the tensor along its mode");

  if (theta1 != 1.0) scale(sk, theta1);
  for (Index n = 0; n < order; ++n) {
    const DrmInstance& omega = maps.omega[sz(n)];
    Matrix& v = sk.factor_sketches[sz(n)];
    if (n == mode) {
      v.middleRows(offset, e) += theta2 * factor_sketch(slab, n, omega);
    } else if (omega.spec().kind == DrmKind::trp) {
      const Index pos = position_of(trp_modes(order, n), mode);
      v += theta2 * factor_sketch(slab, n, omega.trp_slice(pos, offset, e));
    } else {
      const auto cols = slab_columns(sk.shape, slab.shape(), n, mode, offset);
      v += theta2 * omega.right_apply_rows(unfold(slab, n), cols);
    }
  }
  sk.core_sketch += theta2 * core_sketch_of(slab, maps, mode, offset);
}

TuckerSketch sketch_slab_update(const TuckerSketch& sk, Index mode, Index offset, const Tensor& slab, double theta1,
                                double theta2) {
  TuckerSketch out = sk;
  sketch_slab_update(out, make_sketch_maps(sk.shape, sk.params), mode, offset, slab, theta1, theta2);
  return out;
}

TuckerSketch sketch_merge(const TuckerSketch& a, const TuckerSketch& b) {
  if (a.shape != b.shape) fail(ErrorCode::param_mismatch, "cannot merge sketches of differently shaped tensors");
  if (!(a.params == b.params))
    fail(ErrorCode::param_mismatch,
         a.params.master_seed != b.params.master_seed
             ? "cannot merge sketches with different seeds (" + std::to_string(a.params.master_seed) + " vs " +
                   std::to_string(b.params.master_seed) + ")"
             : std::string("cannot merge sketches with different parameters"));
  TuckerSketch out = a;
  for (std::size_t n = 0; n < out.factor_sketches.size(); ++n) out.factor_sketches[n] += b.factor_sketches[n];
  out.core_sketch += b.core_sketch;
  return out;
}

Index sketch_storage(const Shape& shape, const SketchParams& params) {
  Index total = 0;
  for (std::size_t n = 0; n < shape.size(); ++n) total += shape[n] * params.k[n];
  return total + shape_product(params.s);
}

Index sketch_storage(const TuckerSketch& sk) { return sketch_storage(sk.shape, sk.params); }

}  // namespace tks
