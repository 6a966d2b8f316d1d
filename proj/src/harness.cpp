#include "tucksketch/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>

#include "tucksketch/error.hpp"
#include "tucksketch/recovery.hpp"
#include "tucksketch/rng.hpp"
#include "tucksketch/sketch.hpp"

namespace tks {

namespace {

std::size_t sz(Index i) { return static_cast<std::size_t>(i); }

enum : std::uint64_t { kTagCore = 1, kTagFactor = 2, kTagNoise = 3, kTagMask = 4, kTagData = 5, kTagSketch = 6 };

Matrix orthonormal_factor(std::uint64_t key, Index rows, Index cols) {
  Matrix g(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index i = 0; i < rows; ++i) g(i, c) = rng::normal(key, static_cast<std::uint64_t>(c * rows + i));
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

Matrix sparse_factor(std::uint64_t key, Index rows, Index cols, double delta) {
  Matrix a = Matrix::Zero(rows, cols);
  const std::uint64_t mask_key = rng::derive_seed(key, kTagMask);
  for (Index i = 0; i < rows; ++i) {
    if (rng::uniform(mask_key, static_cast<std::uint64_t>(i)) >= delta) continue;
    for (Index c = 0; c < cols; ++c) a(i, c) = rng::uniform(key, static_cast<std::uint64_t>(c * rows + i));
  }
  return a;
}

struct TrialOutcome {
  // Per method: normalized error, regret, normalized bound.
  std::vector<double> err;
  std::vector<double> regret;
  std::vector<double> bound;
};

TrialOutcome run_trial(const ExperimentCell& cell, const ExperimentOptions& options, int trial) {
  SyntheticSpec ds = cell.data;
  ds.seed = rng::derive_seed(rng::derive_seed(options.seed ^ cell.data.seed, kTagData), static_cast<std::uint64_t>(trial));
  const Tensor x = gen_synthetic(ds);
  const double x2 = std::pow(fro_norm(x), 2);
  const auto order = static_cast<std::size_t>(ds.order);
  const std::vector<Index> rank(order, ds.rank);
  const std::vector<Index> k(order, cell.k);
  const std::vector<Index> s(order, cell.s);

  SketchParams params;
  params.k = k;
  params.s = s;
  params.master_seed =
      rng::derive_seed(rng::derive_seed(options.seed, kTagSketch), static_cast<std::uint64_t>(trial));
  params.factor_kind = cell.drm;
  params.core_kind = cell.drm == DrmKind::trp ? DrmKind::gaussian : cell.drm;
  const TuckerSketch sk = tucker_sketch(x, params);

  const TuckerFactorization two = two_pass_recover(x, sk).factorization;
  const TuckerFactorization one = one_pass_recover(sk).factorization;
  const TuckerFactorization ho = hosvd(x, rank);
  const TuckerFactorization hi = hooi(x, rank).factorization;

  const SpectrumProfile profile = spectrum_profile(x);
  double tail = 0;
  for (Index n = 0; n < ds.order; ++n) tail += tail_energy(profile, n, ds.rank);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double b2 = bound_two_pass(profile, k) / x2;
  const double b1 = cell.s > cell.k + 1 ? bound_one_pass(profile, k, s) / x2 : nan;

  const double hooi_err = normalized_error(x, tucker_to_dense(hi));
  TrialOutcome out;
  auto add = [&](const TuckerFactorization& t, double bound) {
    const double e = normalized_error(x, tucker_to_dense(t));
    out.err.push_back(e);
    out.regret.push_back(e - hooi_err);
    out.bound.push_back(bound);
  };
  add(two, b2);
  add(one, b1);
  add(ho, tail / x2);
  add(hi, tail / x2);
  if (options.truncate) {
    add(fixed_rank_truncate(two, rank), nan);
    add(fixed_rank_truncate(one, rank), nan);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::low_rank_noise:
      return "low_rank_noise";
    case Scheme::sparse_low_rank_noise:
      return "sparse_low_rank_noise";
    case Scheme::poly_decay:
      return "poly_decay";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "low_rank_noise" || name == "lk") return Scheme::low_rank_noise;
  if (name == "sparse_low_rank_noise" || name == "slk") return Scheme::sparse_low_rank_noise;
  if (name == "poly_decay" || name == "spd") return Scheme::poly_decay;
  fail(ErrorCode::invalid_argument, "unknown synthetic scheme '" + std::string(name) + "'");
}

void validate(const SyntheticSpec& spec) {
  require(spec.order >= 2, "synthetic tensors need order >= 2");
  require(spec.side >= 1, "side length must be positive");
  require(spec.rank >= 1 && spec.rank <= spec.side, "need 1 <= r <= I");
  require(spec.gamma >= 0.0, "noise level gamma must be non-negative");
  require(spec.delta > 0.0 && spec.delta <= 1.0, "sparsity delta must be in (0, 1]");
}

SyntheticTensor gen_synthetic_parts(const SyntheticSpec& spec) {
  validate(spec);
  const Shape shape(sz(spec.order), spec.side);
  if (spec.scheme == Scheme::poly_decay) {
    std::vector<double> values(sz(spec.side), 0.0);
    for (Index i = 0; i < spec.side - 1; ++i)
      values[sz(i)] = i < spec.rank ? 1.0 : std::pow(static_cast<double>(i - spec.rank + 2), -spec.decay);
    if (spec.side == 1) values[0] = 1.0;
    Tensor x = superdiag(values, spec.order);
    return {x, x};
  }

  TuckerFactorization t;
  t.core = Tensor(Shape(sz(spec.order), spec.rank));
  const std::uint64_t core_key = rng::derive_seed(spec.seed, kTagCore);
  auto core = t.core.data();
  for (std::size_t i = 0; i < core.size(); ++i) core[i] = rng::uniform(core_key, i);
  const std::uint64_t factor_key = rng::derive_seed(spec.seed, kTagFactor);
  for (Index n = 0; n < spec.order; ++n) {
    const std::uint64_t key = rng::derive_seed(factor_key, static_cast<std::uint64_t>(n));
    t.factors.push_back(spec.scheme == Scheme::low_rank_noise ? orthonormal_factor(key, spec.side, spec.rank)
                                                              : sparse_factor(key, spec.side, spec.rank, spec.delta));
  }
  Tensor signal = tucker_to_dense(t);
  Tensor x = signal;
  if (spec.gamma > 0.0) {
    const double scale =
        spec.gamma * fro_norm(signal) / std::pow(static_cast<double>(spec.side), static_cast<double>(spec.order) / 2.0);
    const std::uint64_t noise_key = rng::derive_seed(spec.seed, kTagNoise);
    auto data = x.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += scale * rng::normal(noise_key, i);
  }
  return {std::move(x), std::move(signal)};
}

Tensor gen_synthetic(const SyntheticSpec& spec) { return gen_synthetic_parts(spec).x; }

SpectrumProfile spectrum_profile(const Tensor& x) {
  SpectrumProfile p;
  for (Index n = 0; n < x.order(); ++n) {
    const Matrix u = unfold(x, n);
    Eigen::BDCSVD<Matrix> svd(u);
    const Vector& sv = svd.singularValues();
    p.sigma.emplace_back(sv.data(), sv.data() + sv.size());
  }
  return p;
}

double tail_energy(const SpectrumProfile& profile, Index mode, Index rho) {
  require(mode >= 0 && mode < static_cast<Index>(profile.sigma.size()), "tail_energy: mode out of range");
  require(rho >= 0, "tail_energy: cutoff must be non-negative");
  const auto& sv = profile.sigma[sz(mode)];
  double sum = 0;
  for (std::size_t i = sz(rho); i < sv.size(); ++i) sum += sv[i] * sv[i];
  return sum;
}

double bound_two_pass(const SpectrumProfile& profile, std::span<const Index> k) {
  require(k.size() == profile.sigma.size(), "bound: k needs one entry per mode");
  double total = 0;
  for (std::size_t n = 0; n < k.size(); ++n) {
    if (k[n] < 3) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (Index rho = 1; rho < k[n] - 1; ++rho) {
      const double factor = 1.0 + static_cast<double>(rho) / static_cast<double>(k[n] - rho - 1);
      best = std::min(best, factor * tail_energy(profile, static_cast<Index>(n), rho));
    }
    total += best;
  }
  return total;
}

double one_pass_delta(std::span<const Index> k, std::span<const Index> s) {
  require(k.size() == s.size(), "bound: k and s need the same length");
  double delta = 0;
  for (std::size_t n = 0; n < k.size(); ++n) {
    require(s[n] > k[n] + 1, "one-pass bound undefined: mode " + std::to_string(n) + " has s=" +
                                 std::to_string(s[n]) + " <= k+1=" + std::to_string(k[n] + 1));
    delta = std::max(delta, static_cast<double>(k[n]) / static_cast<double>(s[n] - k[n] - 1));
  }
  return delta;
}

double bound_one_pass(const SpectrumProfile& profile, std::span<const Index> k, std::span<const Index> s) {
  const double delta = one_pass_delta(k, s);
  return (1.0 + delta) * bound_two_pass(profile, k);
}

double normalized_error(const Tensor& x, const Tensor& approx) {
  require(x.shape() == approx.shape(), "metrics: shapes differ");
  const double nx = fro_norm(x);
  require(nx > 0.0, "metrics: reference tensor has zero norm");
  return fro_norm(x - approx) / nx;
}

Metrics metrics(const Tensor& x, const Tensor& approx, double baseline_hooi_error) {
  const double e = normalized_error(x, approx);
  return {e, e - baseline_hooi_error};
}

std::vector<std::string> experiment_methods(const ExperimentOptions& options) {
  std::vector<std::string> m{"two_pass", "one_pass", "hosvd", "hooi"};
  if (options.truncate) {
    m.emplace_back("two_pass_fixed");
    m.emplace_back("one_pass_fixed");
  }
  return m;
}

std::vector<ResultRow> run_experiment(std::span<const ExperimentCell> grid, const ExperimentOptions& options) {
  require(options.trials >= 1, "need at least one trial");
  for (const auto& cell : grid) {
    validate(cell.data);
    require(std::pow(static_cast<double>(cell.data.side), static_cast<double>(cell.data.order)) <=
                static_cast<double>(options.max_elements),
            "experiment cell with I=" + std::to_string(cell.data.side) + ", N=" + std::to_string(cell.data.order) +
                " exceeds the size budget of " + std::to_string(options.max_elements) + " entries");
  }
  const auto methods = experiment_methods(options);
  std::vector<ResultRow> rows;
  for (const auto& cell : grid) {
    std::vector<TrialOutcome> outcomes(sz(options.trials));
    const int threads = std::max(1, std::min(options.threads, options.trials));
    if (threads == 1) {
      for (int t = 0; t < options.trials; ++t) outcomes[sz(t)] = run_trial(cell, options, t);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(sz(threads));
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (int t = w; t < options.trials; t += threads) outcomes[sz(t)] = run_trial(cell, options, t);
          } catch (...) {
            errors[sz(w)] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      ResultRow row;
      row.cell = cell;
      row.method = methods[m];
      row.trials = options.trials;
      double sum = 0, sum_regret = 0, sum_bound = 0;
      for (const auto& o : outcomes) {
        sum += o.err[m];
        sum_regret += o.regret[m];
        sum_bound += o.bound[m];
      }
      const double n = options.trials;
      row.mean_err = sum / n;
      row.mean_regret = sum_regret / n;
      row.bound = sum_bound / n;
      double var = 0;
      for (const auto& o : outcomes) var += (o.err[m] - row.mean_err) * (o.err[m] - row.mean_err);
      row.std_err = options.trials > 1 ? std::sqrt(var / (n - 1)) : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_result_table(std::ostream& os, std::span<const ResultRow> rows) {
  os << "scheme,param,I,N,r,k,s,drm_kind,method,trials,mean_err,std_err,mean_regret,bound\n";
  for (const auto& r : rows) {
    const auto& d = r.cell.data;
    std::string param;
    switch (d.scheme) {
      case Scheme::low_rank_noise:
        param = format_double(d.gamma);
        break;
      case Scheme::sparse_low_rank_noise:
        param = format_double(d.gamma) + "/" + format_double(d.delta);
        break;
      case Scheme::poly_decay:
        param = format_double(d.decay);
        break;
    }
    os << to_string(d.scheme) << ',' << param << ',' << d.side << ',' << d.order << ',' << d.rank << ',' << r.cell.k
       << ',' << r.cell.s << ',' << to_string(r.cell.drm) << ',' << r.method << ',' << r.trials << ','
       << format_double(r.mean_err) << ',' << format_double(r.std_err) << ',' << format_double(r.mean_regret) << ','
       << format_double(r.bound) << '\n';
  }
}

}  // namespace tks
