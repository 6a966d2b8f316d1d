#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "tucksketch/error.hpp"
#include "tucksketch/harness.hpp"
#include "tucksketch/recovery.hpp"

using namespace tks;

namespace {

SyntheticSpec spec(Scheme scheme, Index side, Index order, Index rank, std::uint64_t seed) {
  SyntheticSpec s;
  s.scheme = scheme;
  s.side = side;
  s.order = order;
  s.rank = rank;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("noise-free low-rank data has no tail beyond r") {
  SyntheticSpec s = spec(Scheme::low_rank_noise, 12, 3, 3, 1);
  s.gamma = 0;
  const Tensor x = gen_synthetic(s);
  const SpectrumProfile p = spectrum_profile(x);
  const double x2 = std::pow(fro_norm(x), 2);
  for (Index n = 0; n < 3; ++n) CHECK(tail_energy(p, n, 3) <= 1e-18 * x2 + 1e-300);
  CHECK(tail_energy(p, 0, 2) > 1e-6 * x2);
}

TEST_CASE("noise has the requested level") {
  SyntheticSpec s = spec(Scheme::low_rank_noise, 20, 3, 2, 2);
  s.gamma = 0.5;
  const SyntheticTensor t = gen_synthetic_parts(s);
  const double noise = fro_norm(t.x - t.signal);
  // γ ||X♮|| / I^{N/2} per entry over I^N entries.
  CHECK(noise == doctest::Approx(0.5 * fro_norm(t.signal)).epsilon(0.05));
}

TEST_CASE("low-rank factors are orthonormal") {
  SyntheticSpec s = spec(Scheme::low_rank_noise, 9, 3, 3, 3);
  s.gamma = 0;
  const Tensor x = gen_synthetic(s);
  const TuckerFactorization h = hosvd(x, {3, 3, 3});
  CHECK(fro_norm(x - tucker_to_dense(h)) <= 1e-12 * fro_norm(x));
}

TEST_CASE("polynomial decay values") {
  SyntheticSpec s = spec(Scheme::poly_decay, 8, 3, 3, 0);
  s.decay = 2;
  const Tensor x = gen_synthetic(s);
  const std::vector<double> expect{1, 1, 1, 0.25, 1.0 / 9, 1.0 / 16, 1.0 / 25, 0};
  CHECK(x == superdiag(expect, 3));
}

TEST_CASE("sparse scheme has about δ^N nonzeros") {
  const double delta = 0.2;
  const int seeds = 50;
  double mean = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    SyntheticSpec s = spec(Scheme::sparse_low_rank_noise, 40, 3, 3, static_cast<std::uint64_t>(seed));
    s.delta = delta;
    s.gamma = 0;
    const SyntheticTensor t = gen_synthetic_parts(s);
    Index nnz = 0;
    for (double v : t.signal.data()) nnz += v != 0.0;
    mean += static_cast<double>(nnz) / static_cast<double>(t.signal.size()) / seeds;
  }
  // Per-tensor std of the nonzero fraction is about 0.0046 here.
  CHECK(std::abs(mean - std::pow(delta, 3)) <= 3 * 0.0046 / std::sqrt(seeds));
}

TEST_CASE("generation is deterministic and seed dependent") {
  const SyntheticSpec a = spec(Scheme::low_rank_noise, 6, 3, 2, 4);
  CHECK(gen_synthetic(a) == gen_synthetic(a));
  CHECK_FALSE(gen_synthetic(a) == gen_synthetic(spec(Scheme::low_rank_noise, 6, 3, 2, 5)));
  CHECK_THROWS_AS(gen_synthetic(spec(Scheme::low_rank_noise, 6, 3, 7, 5)), Error);
  CHECK(parse_scheme("slk") == Scheme::sparse_low_rank_noise);
  CHECK_THROWS_AS(parse_scheme("nope"), Error);
}

TEST_CASE("tail energy") {
  const std::vector<double> vals{3, 2, 1};
  const SpectrumProfile p = spectrum_profile(superdiag(vals, 3));
  for (Index n = 0; n < 3; ++n) {
    CHECK(tail_energy(p, n, 0) == doctest::Approx(14));
    CHECK(tail_energy(p, n, 1) == doctest::Approx(5));
    CHECK(tail_energy(p, n, 2) == doctest::Approx(1));
    CHECK(tail_energy(p, n, 3) == doctest::Approx(0).epsilon(1e-12));
    CHECK(tail_energy(p, n, 10) == 0);
  }
}

TEST_CASE("bounds") {
  const std::vector<Index> k3{3, 3, 3}, s7{7, 7, 7};
  const SpectrumProfile zero = spectrum_profile(Tensor(Shape{6, 6, 6}));
  CHECK(bound_two_pass(zero, k3) == 0);
  CHECK(bound_one_pass(zero, k3, s7) == 0);

  const Tensor x = testutil::random_tensor({10, 10, 10}, 7);
  const SpectrumProfile p = spectrum_profile(x);
  CHECK(one_pass_delta(k3, s7) == 1.0);
  CHECK(bound_one_pass(p, k3, s7) == doctest::Approx(2 * bound_two_pass(p, k3)));
  // k = 3: only ρ = 1, factor 2.
  double expect = 0;
  for (Index n = 0; n < 3; ++n) expect += 2 * tail_energy(p, n, 1);
  CHECK(bound_two_pass(p, k3) == doctest::Approx(expect));

  const std::vector<Index> k2{2, 3, 3};
  CHECK(std::isinf(bound_two_pass(p, k2)));
  CHECK_THROWS_AS(one_pass_delta(k3, std::vector<Index>{4, 7, 7}), Error);

  for (Index r : {1, 2, 3}) {
    const Index k = 2 * r + 1, s = 2 * k + 1;
    const std::vector<Index> kk(3, k), ss(3, s);
    double tau = 0;
    for (Index n = 0; n < 3; ++n) tau += tail_energy(p, n, r);
    CHECK(bound_two_pass(p, kk) <= 2 * tau * (1 + 1e-12));
    CHECK(bound_one_pass(p, kk, ss) <= 4 * tau * (1 + 1e-12));
    CHECK(bound_one_pass(p, kk, ss) >= bound_two_pass(p, kk));
  }
}

TEST_CASE("metrics") {
  const Tensor x = testutil::random_tensor({4, 4, 4}, 8);
  const Metrics m = metrics(x, x, 0.1);
  CHECK(m.normalized_error == 0);
  CHECK(m.regret == doctest::Approx(-0.1));
  CHECK(normalized_error(x, Tensor(x.shape())) == doctest::Approx(1));
  CHECK_THROWS_AS(normalized_error(Tensor(x.shape()), x), Error);
  CHECK_THROWS_AS(normalized_error(x, Tensor(Shape{4, 4})), Error);
}

TEST_CASE("experiment driver") {
  ExperimentCell cell;
  cell.data = spec(Scheme::low_rank_noise, 10, 3, 2, 9);
  cell.data.gamma = 0;
  cell.k = 5;
  cell.s = 11;
  ExperimentCell other = cell;
  other.drm = DrmKind::trp;
  const std::vector<ExperimentCell> grid{cell, other};

  ExperimentOptions opt;
  opt.trials = 4;
  opt.seed = 3;
  const auto rows = run_experiment(grid, opt);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].method == "two_pass");
  CHECK(rows[1].method == "one_pass");
  CHECK(rows[3].method == "hooi");
  for (const auto& r : rows) {
    CHECK(r.trials == 4);
    CHECK(r.mean_err <= 1e-8);
    CHECK(r.bound >= 0);
  }

  opt.threads = 3;
  const auto threaded = run_experiment(grid, opt);
  std::ostringstream a, b;
  write_result_table(a, rows);
  write_result_table(b, threaded);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("scheme,param,I,N,r,k,s,drm_kind,method,trials,mean_err,std_err,mean_regret,bound\n", 0) == 0);

  opt.truncate = true;
  const auto truncated = run_experiment(std::span(grid).first(1), opt);
  REQUIRE(truncated.size() == 6);
  CHECK(truncated[4].method == "two_pass_fixed");
  CHECK(std::isnan(truncated[5].bound));

  ExperimentCell big = cell;
  big.data.side = 300;
  CHECK_THROWS_AS(run_experiment(std::vector<ExperimentCell>{big}, opt), Error);
}

TEST_CASE("one-pass bound column is NaN when s <= k + 1") {
  ExperimentCell cell;
  cell.data = spec(Scheme::low_rank_noise, 8, 3, 2, 10);
  cell.k = 4;
  cell.s = 5;
  ExperimentOptions opt;
  opt.trials = 2;
  const auto rows = run_experiment(std::vector<ExperimentCell>{cell}, opt);
  CHECK(std::isfinite(rows[0].bound));
  CHECK(std::isnan(rows[1].bound));
}
