// One line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "support.hpp"
#include "tucksketch/harness.hpp"
#include "tucksketch/io.hpp"
#include "tucksketch/recovery.hpp"
#include "tucksketch/sketch.hpp"

using namespace tks;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %d: %s %s (%.2fs)\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

SketchParams gaussian_params(Index order, Index k, Index s, std::uint64_t seed) {
  SketchParams p;
  p.k.assign(static_cast<std::size_t>(order), k);
  p.s.assign(static_cast<std::size_t>(order), s);
  p.master_seed = seed;
  return p;
}

SyntheticSpec low_rank(Index side, Index rank, double gamma, std::uint64_t seed) {
  SyntheticSpec s;
  s.scheme = Scheme::low_rank_noise;
  s.side = side;
  s.order = 3;
  s.rank = rank;
  s.gamma = gamma;
  s.seed = seed;
  return s;
}

double sq(double v) { return v * v; }

Outcome exact_rank() {
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor x = gen_synthetic(low_rank(50, 5, 0.0, 1));
  const TuckerSketch sk = tucker_sketch(x, gaussian_params(3, 11, 23, 2));
  const double e2 = normalized_error(x, tucker_to_dense(two_pass_recover(x, sk).factorization));
  const double e1 = normalized_error(x, tucker_to_dense(one_pass_recover(sk).factorization));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {e2 <= 1e-9 && e1 <= 1e-8 && secs < 10, fmt("two-pass %.3g, one-pass %.3g, %.2fs", e2, e1, secs)};
}

Outcome one_pass_bound() {
  bool ok = true;
  std::string detail;
  const Index r = 5, k = 2 * r + 1, s = 2 * k + 1;
  const std::vector<Index> kk(3, k), ss(3, s);
  for (double gamma : {0.01, 1.0}) {
    const int trials = 50;
    double mse = 0, bound = 0, tau = 0;
    for (int t = 0; t < trials; ++t) {
      const Tensor x = gen_synthetic(low_rank(50, r, gamma, 1000 + static_cast<std::uint64_t>(t)));
      const double x2 = sq(fro_norm(x));
      const TuckerSketch sk = tucker_sketch(x, gaussian_params(3, k, s, 5000 + static_cast<std::uint64_t>(t)));
      const Tensor approx = tucker_to_dense(one_pass_recover(sk).factorization);
      mse += sq(fro_norm(x - approx)) / x2 / trials;
      const SpectrumProfile p = spectrum_profile(x);
      bound += bound_one_pass(p, kk, ss) / x2 / trials;
      double t2 = 0;
      for (Index n = 0; n < 3; ++n) t2 += tail_energy(p, n, r);
      tau += t2 / x2 / trials;
    }
    const bool pass = mse <= 1.1 * bound && mse <= 4 * tau;
    ok = ok && pass;
    detail += fmt("gamma=%g: mse %.4g, bound %.4g", gamma, mse, bound) + fmt(", 4*tail %.4g; ", 4 * tau);
  }
  return {ok, detail};
}

Outcome pinv_lemma() {
  const Index t = 15, q = 5, p = 3;
  const int trials = 2000;
  std::mt19937_64 gen(7);
  std::normal_distribution<double> nd;
  auto gauss = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
    return m;
  };
  const Matrix b = Matrix::Identity(p, p);
  double mean = 0;
  for (int i = 0; i < trials; ++i) {
    const Matrix g1 = gauss(t, q), g2 = gauss(t, p);
    mean += g1.completeOrthogonalDecomposition().solve(g2 * b).squaredNorm() / trials;
  }
  const double target = static_cast<double>(q) / static_cast<double>(t - q - 1) * b.squaredNorm();
  return {std::abs(mean - target) <= 0.1 * target, fmt("mean %.4f, target %.4f", mean, target)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TKS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double max_rel(const TuckerSketch& a, const TuckerSketch& b) {
  double scale = 0, diff = 0;
  auto visit = [&](const double* x, const double* y, Index n) {
    for (Index i = 0; i < n; ++i) {
      scale = std::max(scale, std::abs(x[i]));
      diff = std::max(diff, std::abs(x[i] - y[i]));
    }
  };
  for (std::size_t n = 0; n < a.factor_sketches.size(); ++n)
    visit(a.factor_sketches[n].data(), b.factor_sketches[n].data(), a.factor_sketches[n].size());
  visit(a.core_sketch.data().data(), b.core_sketch.data().data(), a.core_sketch.size());
  return diff / scale;
}

Outcome streaming_equivalence() {
  const fs::path dir = fs::temp_directory_path() / ("tks_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto p = [&](const std::string& n) { return (dir / n).string(); };
  bool ok = run_cli("gen --side 12 --order 3 --rank 3 --gamma 0.1 --seed 11 --out " + p("x.tkt")) == 0;
  const std::string common = " --k 4,5,6 --s 9,11,12 --seed 99";
  ok = ok && run_cli("sketch --input " + p("x.tkt") + common + " --out " + p("one.tks")) == 0;
  ok = ok && run_cli("partition --input " + p("x.tkt") + " --mode 1 --parts 4 --stream " + p("x.tkus")) == 0;
  ok = ok && run_cli("sketch --stream " + p("x.tkus") + common + " --out " + p("stream.tks")) == 0;
  ok = ok && run_cli("partition --input " + p("x.tkt") + " --mode 2 --parts 3 --shards " + p("shard")) == 0;
  for (int i = 0; ok && i < 3; ++i)
    ok = run_cli("sketch --stream " + p("shard." + std::to_string(i) + ".tkus") + common + " --out " +
                 p("s" + std::to_string(i) + ".tks")) == 0;
  ok = ok && run_cli("merge " + p("s1.tks") + " " + p("s2.tks") + " " + p("s0.tks") + " --out " + p("merged.tks")) == 0;
  if (!ok) {
    fs::remove_all(dir);
    return {false, "a CLI step failed"};
  }
  const TuckerSketch one = io::load_sketch(p("one.tks"));
  const double ds = max_rel(one, io::load_sketch(p("stream.tks")));
  const double dm = max_rel(one, io::load_sketch(p("merged.tks")));
  fs::remove_all(dir);
  return {ds <= 1e-12 && dm <= 1e-12, fmt("streamed %.3g, merged %.3g", ds, dm)};
}

Outcome trp() {
  const Shape shape{4, 3, 5, 3, 6};
  const Index k = 3;
  SketchParams params = gaussian_params(5, k, 9, 3);
  params.factor_kind = DrmKind::trp;
  const SketchMaps maps = make_sketch_maps(shape, params);
  double worst = 0;
  for (Index n = 0; n < 5; ++n) {
    const DrmInstance& om = maps.omega[static_cast<std::size_t>(n)];
    const auto f = om.trp_factors();
    Matrix kr = f[0];
    for (std::size_t j = 1; j < f.size(); ++j) kr = khatri_rao(kr, f[j]);
    const Matrix m = testutil::random_matrix(shape[static_cast<std::size_t>(n)], om.in_dim(), 20 + n);
    worst = std::max(worst, testutil::rel_diff(om.right_apply(m), m * kr));
  }
  reset_trp_explicit_peak();
  const Tensor x = testutil::random_tensor(shape, 21);
  const TuckerSketch sk = tucker_sketch(x, params);
  const Index peak = trp_explicit_peak();
  double dense = 0;
  for (Index n = 0; n < 5; ++n) {
    const Matrix kr = materialize(maps.omega[static_cast<std::size_t>(n)]);
    dense = std::max(dense, testutil::rel_diff(sk.factor_sketches[static_cast<std::size_t>(n)], unfold(x, n) * kr));
  }
  // Random scalars: one I_j x k factor per mode, shared by every Ω_n.
  Index held = 0, expect = 0;
  for (Index j = 0; j < 5; ++j) {
    expect += shape[static_cast<std::size_t>(j)] * k;
    const Index owner = j == 0 ? 1 : 0;
    const auto f = maps.omega[static_cast<std::size_t>(owner)].trp_factors();
    // Descending order of the remaining modes: mode j sits at position 3 - (j > owner ? j - 1 : j).
    const Index pos = 3 - (j > owner ? j - 1 : j);
    held += f[static_cast<std::size_t>(pos)].size();
    for (Index n = 0; n < 5; ++n) {
      if (n == j) continue;
      const auto g = maps.omega[static_cast<std::size_t>(n)].trp_factors();
      const Index pn = 3 - (j > n ? j - 1 : j);
      if (!(g[static_cast<std::size_t>(pn)] == f[static_cast<std::size_t>(pos)])) held = -1;
    }
  }
  const bool ok = worst <= 1e-12 && dense <= 1e-12 && peak == 0 && held == expect;
  return {ok, fmt("implicit vs Khatri-Rao %.3g, sketch vs dense %.3g, explicit peak %g", worst, dense,
                  static_cast<double>(peak)) +
                  fmt(", random scalars %g of %g", static_cast<double>(held), static_cast<double>(expect))};
}

Outcome one_vs_two_pass() {
  double e1 = 0, e2 = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = gen_synthetic(low_rank(30, 5, 1.0, 300 + seed));
    const TuckerSketch sk = tucker_sketch(x, gaussian_params(3, 11, 23, 400 + seed));
    e2 += normalized_error(x, tucker_to_dense(two_pass_recover(x, sk).factorization)) / 20;
    e1 += normalized_error(x, tucker_to_dense(one_pass_recover(sk).factorization)) / 20;
  }
  return {e1 >= e2, fmt("one-pass %.4f, two-pass %.4f", e1, e2)};
}

Outcome hooi_monotone() {
  bool ok = true;
  double worst_rise = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Tensor x = testutil::random_tensor({8, 9, 10}, 500 + i);
    const std::vector<Index> rank{2, 3, 4};
    const HooiResult h = hooi(x, rank, {50, 0.0});
    for (std::size_t j = 1; j < h.objective.size(); ++j) {
      worst_rise = std::max(worst_rise, h.objective[j] - h.objective[j - 1]);
      ok = ok && h.objective[j] <= h.objective[j - 1] + 1e-12;
    }
    const double eh = normalized_error(x, tucker_to_dense(h.factorization));
    const double es = normalized_error(x, tucker_to_dense(hosvd(x, rank)));
    ok = ok && eh <= es;
  }
  return {ok, fmt("largest objective increase %.3g", worst_rise)};
}

Outcome identities() {
  double worst_inner = 0, worst_pyth = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Tensor x = gen_synthetic(low_rank(14, 3, 0.5, 600 + i));
    const TuckerSketch sk = tucker_sketch(x, gaussian_params(3, 5, 11, 700 + i));
    const Tensor two = tucker_to_dense(two_pass_recover(x, sk).factorization);
    const Tensor one = tucker_to_dense(one_pass_recover(sk).factorization);
    const Tensor a = one - two, b = two - x;
    worst_inner = std::max(worst_inner, std::abs(inner(a, b)) / (fro_norm(a) * fro_norm(b)));
    const double lhs = sq(fro_norm(one - x)), rhs = sq(fro_norm(a)) + sq(fro_norm(b));
    worst_pyth = std::max(worst_pyth, std::abs(lhs - rhs) / lhs);
  }
  return {worst_inner <= 1e-8 && worst_pyth <= 1e-8, fmt("inner %.3g, Pythagorean %.3g", worst_inner, worst_pyth)};
}

Outcome truncation_lemma() {
  double worst = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Tensor x = gen_synthetic(low_rank(12, 2, 0.3, 800 + i));
    const TuckerSketch sk = tucker_sketch(x, gaussian_params(3, 5, 11, 900 + i));
    const TuckerFactorization w = one_pass_recover(sk).factorization;
    const std::vector<Index> r{2, 2, 2};
    for (TruncationMethod m : {TruncationMethod::hooi, TruncationMethod::st_hosvd}) {
      const HooiOptions opt{50, 1e-12};
      const Tensor rotated = tucker_to_dense(fixed_rank_truncate(w, r, m, opt));
      const Tensor dense = tucker_to_dense(w);
      const Tensor direct =
          tucker_to_dense(m == TruncationMethod::hooi ? hooi(dense, r, opt).factorization : st_hosvd(dense, r));
      worst = std::max(worst, std::abs(normalized_error(x, rotated) - normalized_error(x, direct)));
    }
  }
  return {worst <= 1e-10, fmt("largest error difference %.3g", worst)};
}

Outcome tensor_oracle() {
  std::vector<Shape> shapes;
  for (Index a = 1; a <= 3; ++a) {
    shapes.push_back({a});
    for (Index b = 1; b <= 4; ++b) {
      shapes.push_back({a, b});
      for (Index c = 1; c <= 5; ++c) shapes.push_back({a, b, c});
    }
  }
  Index checked = 0;
  double worst = 0;
  std::uint64_t seed = 0;
  for (const Shape& shape : shapes) {
    const Tensor x = testutil::random_tensor(shape, ++seed);
    for (Index n = 0; n < x.order(); ++n) {
      const Matrix u = unfold(x, n);
      const Index rows = 2;
      const Matrix a = testutil::random_matrix(rows, shape[static_cast<std::size_t>(n)], ++seed);
      const Tensor y = mode_product(x, n, a);
      std::vector<Index> idx(shape.size(), 0);
      do {
        Index col = 0, stride = 1;
        for (std::size_t m = 0; m < shape.size(); ++m) {
          if (static_cast<Index>(m) == n) continue;
          col += idx[m] * stride;
          stride *= shape[m];
        }
        worst = std::max(worst, std::abs(u(idx[static_cast<std::size_t>(n)], col) - x.at(idx)));
        ++checked;
      } while (testutil::next_index(idx, shape));
      Shape ys = shape;
      ys[static_cast<std::size_t>(n)] = rows;
      std::vector<Index> yi(ys.size(), 0);
      do {
        double sum = 0;
        std::vector<Index> xi = yi;
        for (Index j = 0; j < shape[static_cast<std::size_t>(n)]; ++j) {
          xi[static_cast<std::size_t>(n)] = j;
          sum += a(yi[static_cast<std::size_t>(n)], j) * x.at(xi);
        }
        worst = std::max(worst, std::abs(y.at(yi) - sum));
        ++checked;
      } while (testutil::next_index(yi, ys));
    }
    if (shape.size() == 2) {
      const Matrix a = testutil::random_matrix(shape[0], 3, ++seed), b = testutil::random_matrix(shape[1], 3, ++seed);
      const Matrix kr = khatri_rao(a, b);
      for (Index c = 0; c < 3; ++c)
        for (Index i = 0; i < shape[0]; ++i)
          for (Index j = 0; j < shape[1]; ++j) {
            worst = std::max(worst, std::abs(kr(i * shape[1] + j, c) - a(i, c) * b(j, c)));
            ++checked;
          }
    }
  }
  return {worst <= 1e-12, fmt("%g shapes, %g entries, worst %.3g", static_cast<double>(shapes.size()),
                              static_cast<double>(checked), worst)};
}

}  // namespace

int main() {
  criterion(1, exact_rank);
  criterion(2, one_pass_bound);
  criterion(3, pinv_lemma);
  criterion(4, streaming_equivalence);
  criterion(5, trp);
  criterion(6, one_vs_two_pass);
  criterion(7, hooi_monotone);
  criterion(8, identities);
  criterion(9, truncation_lemma);
  criterion(10, tensor_oracle);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
