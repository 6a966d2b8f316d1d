#pragma once

// Dimension reduction maps (DRMs).
//
// A DRM is a random in_dim x out_dim matrix Ω. Sketching a matrix M with
// in_dim columns means forming M·Ω; the transposed action Ωᵀ·M contracts the
// rows of M. Maps are described by a DrmSpec (kind, dimensions, seed) and
// realized deterministically from it; only specs ever need to be stored.
//
// Kinds:
//   gaussian     i.i.d. N(0, 1) entries.
//   sparse_sign  entries ±1/sqrt(density) with probability density, else 0.
//   ssrft        Ω = Ξᵀ with Ξ = R·C·S2·P2·C·S1·P1 (signed permutations,
//                orthonormal DCT-II C, restriction R to out_dim coordinates).
//   trp          Ω = A_1 ⊙ A_2 ⊙ ... ⊙ A_p, a Khatri-Rao product of small
//                per-extent maps A_q (trp_extents[q] x out_dim). Never
//                materialized; row index of Ω is i_p + e_p * (i_{p-1} + ...),
//                i.e. the last extent varies fastest.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tucksketch/tensor.hpp"

namespace tks {

enum class DrmKind : std::uint8_t { gaussian = 0, sparse_sign = 1, ssrft = 2, trp = 3 };

std::string_view to_string(DrmKind kind);
DrmKind parse_drm_kind(std::string_view name);

struct DrmSpec {
  DrmKind kind = DrmKind::gaussian;
  Index in_dim = 1;
  Index out_dim = 1;
  std::uint64_t seed = 0;
  // sparse_sign, and trp with sparse constituents.
  double density = 0.1;
  // trp only.
  std::vector<Index> trp_extents;
  // Per-constituent keys. Empty means derive_seed(seed, q) for constituent q.
  std::vector<std::uint64_t> trp_seeds;
  DrmKind trp_constituent = DrmKind::gaussian;

  friend bool operator==(const DrmSpec&, const DrmSpec&) = default;
};

void validate(const DrmSpec& spec);

struct StorageCost {
  // Random scalars the realized map keeps (expected count for sparse maps).
  double scalars = 0;
  // Dense equivalent in_dim * out_dim, reported for comparison.
  double dense_bound = 0;
};

StorageCost drm_storage_cost(const DrmSpec& spec);

class DrmInstance {
 public:
  explicit DrmInstance(DrmSpec spec);

  const DrmSpec& spec() const noexcept { return spec_; }
  Index in_dim() const noexcept { return spec_.in_dim; }
  Index out_dim() const noexcept { return spec_.out_dim; }

  // M·Ω. M must have in_dim columns.
  Matrix right_apply(const Matrix& m) const;
  // Ωᵀ·M. M must have in_dim rows.
  Matrix left_apply(const Matrix& m) const;

  // M·Ω[rows, :], where column j of M stands for input coordinate rows[j].
  Matrix right_apply_rows(const Matrix& m, std::span<const Index> rows) const;
  // Ω[rows, :]ᵀ·M, where row j of M stands for input coordinate rows[j].
  Matrix left_apply_rows(const Matrix& m, std::span<const Index> rows) const;

  // Explicit rows Ω[rows, :].
  Matrix row_block(std::span<const Index> rows) const;

  // TRP only: the map restricted to rows whose constituent `position` index
  // lies in [offset, offset + extent). The result is again an implicit TRP.
  DrmInstance trp_slice(Index position, Index offset, Index extent) const;

  // The dense realized matrix for gaussian/sparse kinds, nullptr otherwise.
  const Matrix* dense() const noexcept;
  // TRP constituents A_1..A_p; empty for other kinds.
  std::span<const Matrix> trp_factors() const noexcept;

  // Number of scalars actually held by this instance.
  Index stored_scalars() const noexcept;

  friend bool operator==(const DrmInstance& a, const DrmInstance& b);

 private:
  struct Ssrft {
    std::vector<Index> coords;
    std::vector<Index> perm1;
    std::vector<Index> perm2;
    std::vector<double> sign1;
    std::vector<double> sign2;
    friend bool operator==(const Ssrft&, const Ssrft&) = default;
  };
  struct Trp {
    std::vector<Matrix> factors;
  };

  DrmInstance(DrmSpec spec, Trp trp);

  // Ξ·M for the SSRFT (M has in_dim rows).
  Matrix ssrft_rows(const Matrix& m) const;
  Matrix trp_right_apply(const Matrix& m) const;
  Matrix trp_rows(std::span<const Index> rows) const;

  DrmSpec spec_;
  std::variant<Matrix, Ssrft, Trp> state_;
};

DrmInstance make_drm(const DrmSpec& spec);

// Same as M·Ω.
Matrix apply_sketch_right(const Matrix& m, const DrmInstance& drm);

enum class SsrftSide { rows, cols };

// rows: Ξ·M (M has in_dim rows, result out_dim x M.cols()).
// cols: M·Ξᵀ (M has in_dim columns, result M.rows() x out_dim).
Matrix ssrft_apply(const DrmInstance& drm, const Matrix& m, SsrftSide side);

// Explicit in_dim x out_dim matrix of the map. Refuses when in_dim*out_dim
// exceeds max_scalars.
inline constexpr Index kDefaultMaterializeCap = Index{1} << 26;
Matrix materialize(const DrmInstance& drm, Index max_scalars = kDefaultMaterializeCap);

// Accounting hook: the largest block of explicit TRP rows (in scalars) formed
// on this thread since the last reset. Sketching with TRP maps keeps it at 0.
Index trp_explicit_peak();
void reset_trp_explicit_peak();

// Orthonormal DCT-II along the columns of m (each column transformed).
Matrix dct_columns(const Matrix& m);

}  // namespace tks
