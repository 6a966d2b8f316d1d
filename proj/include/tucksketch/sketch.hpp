#pragma once

// The Tucker sketch: factor sketches V_n = X^(n)·Ω_n (I_n x k_n) and the core
// sketch H = X ×_0 Φ_0ᵀ ×_1 ... ×_{N-1} Φ_{N-1}ᵀ (s_0 x ... x s_{N-1}).
//
// Every map is regenerated from SketchParams::master_seed:
//   Ω_n           seed derive(derive(master, kRoleOmega), n)
//   Φ_n           seed derive(derive(master, kRolePhi), n)
//   TRP factor j  seed derive(derive(master, kRoleTrpFactor), j)
// With factor_kind == trp, Ω_n is the Khatri-Rao product of the mode-j
// factors A_j for j != n, taken in descending mode order so that the lowest
// remaining mode varies fastest, matching the unfolding's column order. The
// A_j are shared across n (Ω_n uses their first k_n columns).

#include <cstdint>
#include <string>
#include <vector>

#include "tucksketch/drm.hpp"
#include "tucksketch/tensor.hpp"

namespace tks {

inline constexpr std::uint64_t kRoleOmega = 1;
inline constexpr std::uint64_t kRolePhi = 2;
inline constexpr std::uint64_t kRoleTrpFactor = 3;

struct SketchParams {
  std::vector<Index> k;
  std::vector<Index> s;
  std::uint64_t master_seed = 0;
  DrmKind factor_kind = DrmKind::gaussian;
  DrmKind core_kind = DrmKind::gaussian;
  // Constituent kind when factor_kind or core_kind is trp.
  DrmKind trp_constituent = DrmKind::gaussian;
  // Nonzero probability for sparse maps.
  double density = 0.1;

  friend bool operator==(const SketchParams&, const SketchParams&) = default;
};

// k = 2r + 1 and s = 2k + 1 per mode.
SketchParams default_params(const std::vector<Index>& rank, std::uint64_t seed);

// Throws on hard violations (k_n < 1, k_n > I_n, s_n < k_n, kind constraints).
// Returns human-readable warnings, e.g. when s_n <= 2 k_n.
std::vector<std::string> validate(const SketchParams& params, const Shape& shape);

struct TuckerSketch {
  Shape shape;
  SketchParams params;
  std::vector<Matrix> factor_sketches;
  Tensor core_sketch;
};

// Regenerated DRMs for a sketch.
struct SketchMaps {
  std::vector<DrmInstance> omega;
  std::vector<DrmInstance> phi;
};

DrmSpec omega_spec(const Shape& shape, const SketchParams& params, Index mode);
DrmSpec phi_spec(const Shape& shape, const SketchParams& params, Index mode);
SketchMaps make_sketch_maps(const Shape& shape, const SketchParams& params);

// All-zero sketch (the sketch of the zero tensor).
TuckerSketch empty_sketch(const Shape& shape, const SketchParams& params);

// Multiply-add count of the core sketch on dense input with dense Φ_n,
// contracting modes in ascending order. On an I^N tensor with s_n = s this is
// s·(1 - δᴺ)/(1 - δ)·Ī with δ = s/I. Informational only.
double core_sketch_flops(const Shape& shape, const std::vector<Index>& s);

TuckerSketch tucker_sketch(const Tensor& x, const SketchParams& params);
TuckerSketch tucker_sketch(const Tensor& x, const SketchParams& params, const SketchMaps& maps);

// sk ← θ1·sk + θ2·sketch(f).
TuckerSketch sketch_linear_update(const TuckerSketch& sk, const Tensor& f, double theta1, double theta2);

// Update by a tensor that is zero outside the slab offset..offset+extent-1
// along `mode`. `slab` has the sketch's shape except extent along `mode`.
// Only the affected rows of V_mode are touched.
void sketch_slab_update(TuckerSketch& sk, const SketchMaps& maps, Index mode, Index offset, const Tensor& slab,
                        double theta1, double theta2);
TuckerSketch sketch_slab_update(const TuckerSketch& sk, Index mode, Index offset, const Tensor& slab, double theta1,
                                double theta2);

// Componentwise sum. Refuses (ErrorCode::param_mismatch) unless the shapes and
// all parameters, including the master seed, are identical.
TuckerSketch sketch_merge(const TuckerSketch& a, const TuckerSketch& b);

// sum_n I_n k_n + prod_n s_n.
Index sketch_storage(const TuckerSketch& sk);
Index sketch_storage(const Shape& shape, const SketchParams& params);

}  // namespace tks
