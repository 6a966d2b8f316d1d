#pragma once

// Low-rank Tucker recovery from sketches, plus HOSVD/HOOI on dense tensors.

#include <optional>
#include <span>
#include <vector>

#include "tucksketch/sketch.hpp"
#include "tucksketch/tensor.hpp"

namespace tks {

// Threshold on |R_ii| / ||V_n||_F below which a factor sketch column is
// treated as dependent.
inline constexpr double kRankTolerance = 1e-12;
// Largest accepted condition number of Φ_nᵀQ_n in one-pass recovery.
inline constexpr double kMaxCondition = 1e12;

struct FactorBases {
  std::vector<Matrix> q;
  // Modes whose sketch was rank deficient and received completion vectors.
  std::vector<Index> completed_modes;
};

// Orthonormal basis for the range of each V_n (economy QR). Dependent
// directions are replaced by canonical vectors orthogonalized against the
// basis so every Q_n is I_n x k_n with orthonormal columns; V_n = 0 yields
// the first k_n canonical columns.
Matrix orthonormal_basis(const Matrix& v, bool* completed = nullptr);
FactorBases factor_bases(const TuckerSketch& sk);

struct RecoveryReport {
  TuckerFactorization factorization;
  int passes = 1;
  // One-pass: ||(Φ_nᵀQ_n)·W^(n) - H^(n)||_F for each least-squares solve.
  std::vector<double> core_solver_residuals;
  std::vector<Index> completed_modes;
  // HOOI sweeps when a truncation ran.
  int iterations = 0;
};

// ⟦X ×_0 Q_0ᵀ ⋯ ×_{N-1} Q_{N-1}ᵀ; Q_0, …, Q_{N-1}⟧. Needs the data again.
RecoveryReport two_pass_recover(const Tensor& x, const TuckerSketch& sk);

// ⟦H ×_0 (Φ_0ᵀQ_0)† ⋯; Q_0, …⟧ from the sketch alone. Throws
// ErrorCode::rank_infeasible naming the mode when Φ_nᵀQ_n is numerically
// rank deficient.
RecoveryReport one_pass_recover(const TuckerSketch& sk);

// H ×_0 B_0† ⋯ ×_{N-1} B_{N-1}†, each pseudo-inverse applied as a
// column-pivoted QR least-squares solve. Residuals are appended to
// `residuals` when given.
Tensor solve_core(const Tensor& h, std::span<const Matrix> b, std::vector<double>* residuals = nullptr);

enum class TruncationMethod { hooi, st_hosvd };

struct HooiOptions {
  int max_iters = 50;
  double tol = 1e-6;
};

struct HooiResult {
  TuckerFactorization factorization;
  int iterations = 0;
  // Relative squared error (||X||² - ||G||²)/||X||² after initialization and
  // after each sweep.
  std::vector<double> objective;
};

// Top-r left singular vectors, each column signed so its largest-magnitude
// entry is positive.
Matrix leading_left_singular_vectors(const Matrix& m, Index r);

TuckerFactorization hosvd(const Tensor& x, const std::vector<Index>& rank);
TuckerFactorization st_hosvd(const Tensor& x, const std::vector<Index>& rank);
HooiResult hooi(const Tensor& x, const std::vector<Index>& rank, const HooiOptions& options = {});

// Compresses the core of t to rank r and rotates the factors: P_n = Q_n·U_n.
TuckerFactorization fixed_rank_truncate(const TuckerFactorization& t, const std::vector<Index>& rank,
                                        TruncationMethod method = TruncationMethod::hooi,
                                        const HooiOptions& options = {}, int* iterations = nullptr);

}  // namespace tks
