#pragma once

// Synthetic data, error metrics, tail energies and the expected-error bounds
// for sketch-based recovery, plus the Monte-Carlo experiment driver.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tucksketch/drm.hpp"
#include "tucksketch/tensor.hpp"

namespace tks {

enum class Scheme { low_rank_noise, sparse_low_rank_noise, poly_decay };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct SyntheticSpec {
  Scheme scheme = Scheme::low_rank_noise;
  // Noise level for the low-rank schemes.
  double gamma = 0.01;
  // Fraction of nonzero factor rows for the sparse scheme.
  double delta = 0.2;
  // Decay exponent for poly_decay.
  double decay = 1.0;
  Index side = 10;
  Index order = 3;
  Index rank = 2;
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

struct SyntheticTensor {
  Tensor x;
  // Noise-free part (equal to x for poly_decay).
  Tensor signal;
};

// low_rank_noise:        X = X♮ + (γ ||X♮||_F / I^{N/2}) ε, X♮ = ⟦C; A_1, …, A_N⟧
//                        with C ~ Unif[0,1]^{r^N}, A_n orthonormal (QR of a
//                        Gaussian matrix), ε i.i.d. N(0,1).
// sparse_low_rank_noise: as above, but each row of A_n is Unif[0,1] with
//                        probability δ and zero otherwise (not orthonormal),
//                        so X♮ has about δ^N nonzero entries.
// poly_decay:            superdiag(1, …, 1, 2^{-t}, 3^{-t}, …, (I-r)^{-t}) with r
//                        ones, padded with a trailing zero to side length I.
SyntheticTensor gen_synthetic_parts(const SyntheticSpec& spec);
Tensor gen_synthetic(const SyntheticSpec& spec);

// Singular values of every unfolding, descending.
struct SpectrumProfile {
  std::vector<std::vector<double>> sigma;
};

SpectrumProfile spectrum_profile(const Tensor& x);

// sum_{i > rho} σ_i(X^(n))² (1-based i).
double tail_energy(const SpectrumProfile& profile, Index mode, Index rho);

// min over 1 <= ρ_n < k_n - 1, separately per mode, of
// sum_n (1 + ρ_n / (k_n - ρ_n - 1)) τ²_{ρ_n}. +inf when some k_n < 3.
double bound_two_pass(const SpectrumProfile& profile, std::span<const Index> k);
// (1 + Δ) · bound_two_pass with Δ = max_n k_n / (s_n - k_n - 1). Throws when
// some s_n <= k_n + 1.
double bound_one_pass(const SpectrumProfile& profile, std::span<const Index> k, std::span<const Index> s);
double one_pass_delta(std::span<const Index> k, std::span<const Index> s);

struct Metrics {
  double normalized_error = 0;
  double regret = 0;
};

double normalized_error(const Tensor& x, const Tensor& approx);
// regret = normalized_error - baseline, with the baseline being the
// normalized error of HOOI at the target rank.
Metrics metrics(const Tensor& x, const Tensor& approx, double baseline_hooi_error);

struct ExperimentCell {
  SyntheticSpec data;
  Index k = 0;
  Index s = 0;
  DrmKind drm = DrmKind::gaussian;
};

struct ExperimentOptions {
  int trials = 10;
  std::uint64_t seed = 0;
  // Also report two_pass_fixed / one_pass_fixed (recoveries truncated to r).
  bool truncate = false;
  // Refuse cells whose tensor has more entries than this.
  Index max_elements = Index{1} << 24;
  int threads = 1;
};

struct ResultRow {
  ExperimentCell cell;
  std::string method;
  int trials = 0;
  double mean_err = 0;
  double std_err = 0;
  double mean_regret = 0;
  // Mean over trials of the applicable expected squared-error bound divided
  // by ||X||²; NaN when no bound applies.
  double bound = std::numeric_limits<double>::quiet_NaN();
};

// Methods in emission order for the given options.
std::vector<std::string> experiment_methods(const ExperimentOptions& options);

std::vector<ResultRow> run_experiment(std::span<const ExperimentCell> grid, const ExperimentOptions& options);

// Comma-separated table with header
// scheme,param,I,N,r,k,s,drm_kind,method,trials,mean_err,std_err,mean_regret,bound
void write_result_table(std::ostream& os, std::span<const ResultRow> rows);

}  // namespace tks
