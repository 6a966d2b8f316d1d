// tks: command-line front end over the tucksketch C API.
//
//   tks gen       --scheme S [--side I --order N --rank r ...] --out x.tktn
//   tks partition --input x.tktn [--mode m] --parts P (--stream u.tkus | --shards prefix)
//   tks sketch    (--input x.tktn | --stream u.tkus) (--rank r | --k K --s S) [--drm kind] [--seed n] --out sk.tksk
//   tks merge     a.tksk b.tksk ... --out sum.tksk
//   tks recover   --sketch sk.tksk [--input x.tktn] [--mode one-pass|two-pass] [--trunc r] [--out t.tktf] [--report r.json]
//   tks bench     --scheme S --grid "I=50;r=5;k=11,21;gamma=0.01,1" [--trials n] [--seed n] [--out table.csv]
//
// Exit status: 0 ok, 1 internal, 2 bad arguments, 3 I/O, 4 format,
// 5 parameter mismatch, 6 rank infeasible.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tucksketch/tucksketch.h"

namespace {

struct Failure {
  int code;
  std::string message;
};

void check(tks_status st) {
  if (st != TKS_OK) throw Failure{static_cast<int>(st), tks_last_error_message()};
}

[[noreturn]] void usage_error(const std::string& msg) { throw Failure{2, msg}; }

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using TensorPtr = std::unique_ptr<tks_tensor, Deleter<tks_tensor, tks_tensor_free>>;
using SketchPtr = std::unique_ptr<tks_sketch, Deleter<tks_sketch, tks_sketch_free>>;
using TuckerPtr = std::unique_ptr<tks_tucker, Deleter<tks_tucker, tks_tucker_free>>;
using WriterPtr = std::unique_ptr<tks_stream_writer, Deleter<tks_stream_writer, tks_stream_writer_free>>;

TensorPtr load_tensor(const std::string& path) {
  tks_tensor* t = nullptr;
  check(tks_tensor_load(path.c_str(), &t));
  return TensorPtr(t);
}

SketchPtr load_sketch(const std::string& path) {
  tks_sketch* s = nullptr;
  check(tks_sketch_load(path.c_str(), &s));
  return SketchPtr(s);
}

// A single value applies to every mode.
std::vector<int64_t> per_mode(const std::vector<int64_t>& v, size_t order, const char* name) {
  if (v.size() == 1) return std::vector<int64_t>(order, v[0]);
  if (v.size() != order)
    usage_error(std::string("--") + name + " needs 1 or " + std::to_string(order) + " values, got " +
                std::to_string(v.size()));
  return v;
}

tks_drm_kind drm_kind(const std::string& name) {
  tks_drm_kind k;
  if (tks_parse_drm_kind(name.c_str(), &k) != TKS_OK) usage_error(tks_last_error_message());
  return k;
}

tks_scheme scheme(const std::string& name) {
  tks_scheme s;
  if (tks_parse_scheme(name.c_str(), &s) != TKS_OK) usage_error(tks_last_error_message());
  return s;
}

struct GenArgs {
  std::string scheme = "low_rank_noise";
  int64_t side = 10, order = 3, rank = 2;
  double gamma = 0.01, delta = 0.2, decay = 1.0;
  uint64_t seed = 0;
  std::string out;
};

void run_gen(const GenArgs& a) {
  tks_synthetic_spec spec = tks_synthetic_defaults(scheme(a.scheme));
  spec.side = a.side;
  spec.order = a.order;
  spec.rank = a.rank;
  spec.gamma = a.gamma;
  spec.delta = a.delta;
  spec.decay = a.decay;
  spec.seed = a.seed;
  tks_tensor* t = nullptr;
  check(tks_generate(&spec, &t));
  TensorPtr x(t);
  check(tks_tensor_save(x.get(), a.out.c_str()));
}

struct PartitionArgs {
  std::string input;
  int64_t mode = 0;
  int64_t parts = 2;
  std::string stream;
  std::string shards;
};

// Splits [0, n) into `parts` contiguous ranges of near-equal length.
std::vector<std::pair<int64_t, int64_t>> ranges(int64_t n, int64_t parts) {
  std::vector<std::pair<int64_t, int64_t>> r;
  for (int64_t p = 0; p < parts; ++p) {
    const int64_t lo = n * p / parts, hi = n * (p + 1) / parts;
    r.emplace_back(lo, hi - lo);
  }
  return r;
}

void run_partition(const PartitionArgs& a) {
  if (a.stream.empty() == a.shards.empty()) usage_error("give exactly one of --stream or --shards");
  TensorPtr x = load_tensor(a.input);
  const size_t order = tks_tensor_order(x.get());
  if (a.mode < 0 || static_cast<size_t>(a.mode) >= order) usage_error("--mode out of range");
  const int64_t extent = tks_tensor_extent(x.get(), static_cast<size_t>(a.mode));
  if (a.parts < 1 || a.parts > extent)
    usage_error("--parts must be between 1 and the extent " + std::to_string(extent));
  std::vector<int64_t> shape(order);
  for (size_t n = 0; n < order; ++n) shape[n] = tks_tensor_extent(x.get(), n);

  auto write_slab = [&](tks_stream_writer* w, int64_t off, int64_t len) {
    tks_tensor* s = nullptr;
    check(tks_tensor_slab(x.get(), static_cast<size_t>(a.mode), off, len, &s));
    TensorPtr slab(s);
    check(tks_stream_write_slab(w, static_cast<size_t>(a.mode), off, slab.get(), 1.0, 1.0));
  };
  const auto parts = ranges(extent, a.parts);
  if (!a.stream.empty()) {
    tks_stream_writer* w = nullptr;
    check(tks_stream_writer_open(a.stream.c_str(), order, shape.data(), &w));
    WriterPtr writer(w);
    for (auto [off, len] : parts) write_slab(writer.get(), off, len);
    check(tks_stream_commit(writer.get()));
    return;
  }
  for (size_t p = 0; p < parts.size(); ++p) {
    const std::string path = a.shards + "." + std::to_string(p) + ".tkus";
    tks_stream_writer* w = nullptr;
    check(tks_stream_writer_open(path.c_str(), order, shape.data(), &w));
    WriterPtr writer(w);
    write_slab(writer.get(), parts[p].first, parts[p].second);
    check(tks_stream_commit(writer.get()));
    std::cout << path << '\n';
  }
}

struct SketchArgs {
  std::string input;
  std::string stream;
  std::vector<int64_t> rank, k, s;
  std::string drm = "gaussian";
  std::string core_drm;
  std::string constituent = "gaussian";
  double density = 0.1;
  uint64_t seed = 0;
  std::string out;
};

void run_sketch(const SketchArgs& a) {
  if (a.input.empty() == a.stream.empty()) usage_error("give exactly one input source: --input or --stream");
  if (!a.rank.empty() && (!a.k.empty() || !a.s.empty())) usage_error("--rank cannot be combined with --k/--s");
  if (a.rank.empty() && (a.k.empty() || a.s.empty())) usage_error("give --rank, or both --k and --s");

  std::vector<int64_t> shape(TKS_MAX_ORDER);
  size_t order = 0;
  if (!a.input.empty())
    check(tks_tensor_peek_shape(a.input.c_str(), &order, shape.data()));
  else
    check(tks_stream_peek_shape(a.stream.c_str(), &order, shape.data()));
  shape.resize(order);

  std::vector<int64_t> k(order), s(order);
  if (!a.rank.empty()) {
    const auto r = per_mode(a.rank, order, "rank");
    check(tks_default_sizes(order, r.data(), k.data(), s.data()));
  } else {
    k = per_mode(a.k, order, "k");
    s = per_mode(a.s, order, "s");
  }
  tks_sketch_params p{};
  p.order = order;
  p.k = k.data();
  p.s = s.data();
  p.seed = a.seed;
  p.factor_kind = drm_kind(a.drm);
  // TRP needs several modes to factor over; the core maps act on one mode each.
  p.core_kind = a.core_drm.empty() ? (p.factor_kind == TKS_DRM_TRP ? TKS_DRM_GAUSSIAN : p.factor_kind)
                                   : drm_kind(a.core_drm);
  p.trp_constituent = drm_kind(a.constituent);
  p.density = a.density;

  size_t n_warn = 0;
  if (tks_params_check(order, shape.data(), &p, &n_warn) != TKS_OK) usage_error(tks_last_error_message());
  for (size_t i = 0; i < n_warn; ++i) std::cerr << "warning: " << tks_params_warning(i) << '\n';

  tks_sketch* out = nullptr;
  if (!a.input.empty()) {
    TensorPtr x = load_tensor(a.input);
    check(tks_sketch_tensor(x.get(), &p, &out));
  } else {
    check(tks_sketch_stream(a.stream.c_str(), &p, &out));
  }
  SketchPtr sk(out);
  check(tks_sketch_save(sk.get(), a.out.c_str()));
}

struct MergeArgs {
  std::vector<std::string> inputs;
  std::string out;
};

void run_merge(const MergeArgs& a) {
  if (a.inputs.size() < 2) usage_error("merge needs at least two sketch files");
  SketchPtr acc = load_sketch(a.inputs[0]);
  for (size_t i = 1; i < a.inputs.size(); ++i) {
    SketchPtr next = load_sketch(a.inputs[i]);
    tks_sketch* sum = nullptr;
    const tks_status st = tks_sketch_merge(acc.get(), next.get(), &sum);
    if (st != TKS_OK)
      throw Failure{static_cast<int>(st), "'" + a.inputs[i] + "' cannot be merged: " + tks_last_error_message()};
    acc.reset(sum);
  }
  check(tks_sketch_save(acc.get(), a.out.c_str()));
}

struct RecoverArgs {
  std::string sketch;
  std::string input;
  std::string mode = "one-pass";
  std::vector<int64_t> trunc;
  std::string out;
  std::string report;
};

void run_recover(const RecoverArgs& a) {
  tks_recovery_mode mode;
  if (a.mode == "one-pass")
    mode = TKS_ONE_PASS;
  else if (a.mode == "two-pass")
    mode = TKS_TWO_PASS;
  else
    usage_error("--mode must be one-pass or two-pass");
  if (mode == TKS_TWO_PASS && a.input.empty()) usage_error("two-pass recovery needs --input");

  SketchPtr sk = load_sketch(a.sketch);
  const size_t order = tks_sketch_order(sk.get());
  TensorPtr x;
  if (!a.input.empty()) x = load_tensor(a.input);
  std::vector<int64_t> trunc;
  if (!a.trunc.empty()) trunc = per_mode(a.trunc, order, "trunc");

  tks_tucker* t = nullptr;
  tks_recovery_info info{};
  check(tks_recover(sk.get(), x.get(), mode, trunc.empty() ? nullptr : trunc.data(), &t, &info));
  TuckerPtr tucker(t);
  if (!a.out.empty()) check(tks_tucker_save(tucker.get(), a.out.c_str()));

  nlohmann::ordered_json r;
  r["mode"] = a.mode;
  r["passes"] = info.passes;
  std::vector<int64_t> shape, k, s, rank;
  for (size_t n = 0; n < order; ++n) {
    shape.push_back(tks_sketch_extent(sk.get(), n));
    k.push_back(tks_sketch_k(sk.get(), n));
    s.push_back(tks_sketch_s(sk.get(), n));
    rank.push_back(tks_tucker_rank(tucker.get(), n));
  }
  r["shape"] = shape;
  r["k"] = k;
  r["s"] = s;
  r["rank"] = rank;
  r["seed"] = tks_sketch_seed(sk.get());
  r["sketch_storage"] = tks_sketch_storage(sk.get());
  r["truncated"] = !trunc.empty();
  r["hooi_iterations"] = info.iterations;
  r["core_solver_residuals"] = std::vector<double>(info.core_residuals, info.core_residuals + info.n_core_residuals);
  r["completed_modes"] =
      std::vector<int64_t>(info.completed_modes, info.completed_modes + info.n_completed_modes);
  if (x) {
    double err = 0;
    check(tks_tucker_error(tucker.get(), x.get(), &err));
    r["normalized_error"] = err;
  } else {
    r["normalized_error"] = nullptr;
  }
  const std::string text = r.dump(2) + "\n";
  if (a.report.empty() || a.report == "-") {
    std::cout << text;
  } else {
    const std::string tmp = a.report + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      if (!(f << text)) throw Failure{3, "cannot write report '" + a.report + "'"};
    }
    std::error_code ec;
    std::filesystem::rename(tmp, a.report, ec);
    if (ec) throw Failure{3, "cannot write report '" + a.report + "': " + ec.message()};
  }
}

struct BenchArgs {
  std::vector<std::string> schemes{"low_rank_noise"};
  std::string grid;
  int trials = 10;
  uint64_t seed = 0;
  int threads = 1;
  bool truncate = false;
  int64_t max_elements = int64_t{1} << 24;
  std::string out = "-";
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  usage_error("grid value '" + v + "' for " + key + " is not a number");
}

int64_t to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) usage_error("grid value '" + v + "' for " + key + " must be an integer");
  return static_cast<int64_t>(d);
}

// "I=50;N=3;r=5;k=11,21;gamma=0.01,1;drm=gaussian" -> cartesian product.
std::vector<tks_bench_cell> parse_grid(const std::vector<std::string>& schemes, const std::string& grid) {
  std::map<std::string, std::vector<std::string>> axes;
  static const std::vector<std::string> keys{"I", "N", "r", "k", "s", "gamma", "delta", "decay", "drm"};
  for (const auto& part : split(grid, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) usage_error("grid entry '" + part + "' is not key=values");
    const std::string key = part.substr(0, eq);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) usage_error("unknown grid key '" + key + "'");
    axes[key] = split(part.substr(eq + 1), ',');
    if (axes[key].empty()) usage_error("grid key '" + key + "' has no values");
  }
  auto values = [&](const std::string& key, const std::string& fallback) {
    auto it = axes.find(key);
    return it == axes.end() ? std::vector<std::string>{fallback} : it->second;
  };
  std::vector<tks_bench_cell> cells;
  for (const auto& sc : schemes) {
    const tks_synthetic_spec base = tks_synthetic_defaults(scheme(sc));
    for (const auto& I : values("I", std::to_string(base.side)))
      for (const auto& N : values("N", std::to_string(base.order)))
        for (const auto& r : values("r", std::to_string(base.rank)))
          for (const auto& k : values("k", ""))
            for (const auto& s : values("s", ""))
              for (const auto& g : values("gamma", std::to_string(base.gamma)))
                for (const auto& d : values("delta", std::to_string(base.delta)))
                  for (const auto& t : values("decay", std::to_string(base.decay)))
                    for (const auto& drm : values("drm", "gaussian")) {
                      tks_bench_cell c{};
                      c.data = base;
                      c.data.side = to_int("I", I);
                      c.data.order = to_int("N", N);
                      c.data.rank = to_int("r", r);
                      c.data.gamma = to_double("gamma", g);
                      c.data.delta = to_double("delta", d);
                      c.data.decay = to_double("decay", t);
                      c.k = k.empty() ? 2 * c.data.rank + 1 : to_int("k", k);
                      c.s = s.empty() ? 2 * c.k + 1 : to_int("s", s);
                      c.drm = drm_kind(drm);
                      cells.push_back(c);
                    }
  }
  return cells;
}

void run_bench(const BenchArgs& a) {
  const auto cells = parse_grid(a.schemes, a.grid);
  tks_bench_options opt = tks_bench_defaults();
  opt.trials = a.trials;
  opt.seed = a.seed;
  opt.threads = a.threads;
  opt.truncate = a.truncate ? 1 : 0;
  opt.max_elements = a.max_elements;
  check(tks_bench_run(cells.data(), cells.size(), &opt, a.out.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming Tucker sketches: build, merge, recover, benchmark"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a synthetic tensor");
  g->add_option("--scheme", gen.scheme, "low_rank_noise | sparse_low_rank_noise | poly_decay");
  g->add_option("--side", gen.side, "Extent I of every mode");
  g->add_option("--order", gen.order, "Number of modes N");
  g->add_option("--rank", gen.rank, "Tucker rank r");
  g->add_option("--gamma", gen.gamma, "Noise level");
  g->add_option("--delta", gen.delta, "Factor row density (sparse scheme)");
  g->add_option("--decay", gen.decay, "Decay exponent (poly_decay)");
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out)->required();

  PartitionArgs part;
  auto* pt = app.add_subcommand("partition", "Split a tensor into slab updates");
  pt->add_option("--input", part.input)->required();
  pt->add_option("--mode", part.mode, "Mode to split along");
  pt->add_option("--parts", part.parts, "Number of slabs");
  pt->add_option("--stream", part.stream, "One update stream holding every slab");
  pt->add_option("--shards", part.shards, "Prefix for one update stream per slab");

  SketchArgs sk;
  auto* s = app.add_subcommand("sketch", "Sketch a tensor file or an update stream");
  s->add_option("--input", sk.input, "Tensor file");
  s->add_option("--stream", sk.stream, "Update stream file");
  s->add_option("--rank", sk.rank, "Target rank; sets k = 2r+1, s = 2k+1")->delimiter(',');
  s->add_option("--k", sk.k, "Factor sketch sizes")->delimiter(',');
  s->add_option("--s", sk.s, "Core sketch sizes")->delimiter(',');
  s->add_option("--drm", sk.drm, "gaussian | sparse | ssrft | trp");
  s->add_option("--core-drm", sk.core_drm, "Kind of the core maps (default follows --drm, gaussian for trp)");
  s->add_option("--constituent", sk.constituent, "TRP constituent kind");
  s->add_option("--density", sk.density, "Nonzero probability of sparse maps");
  s->add_option("--seed", sk.seed);
  s->add_option("--out", sk.out)->required();

  MergeArgs mg;
  auto* m = app.add_subcommand("merge", "Sum sketches built with identical parameters");
  m->add_option("inputs", mg.inputs)->required();
  m->add_option("--out", mg.out)->required();

  RecoverArgs rc;
  auto* r = app.add_subcommand("recover", "Recover a Tucker approximation from a sketch");
  r->add_option("--sketch", rc.sketch)->required();
  r->add_option("--input", rc.input, "Original tensor (required for two-pass)");
  r->add_option("--mode", rc.mode, "one-pass | two-pass");
  r->add_flag_callback("--one-pass", [&] { rc.mode = "one-pass"; });
  r->add_flag_callback("--two-pass", [&] { rc.mode = "two-pass"; });
  r->add_option("--trunc", rc.trunc, "Truncate to this rank")->delimiter(',');
  r->add_option("--out", rc.out, "Tucker file");
  r->add_option("--report", rc.report, "JSON report path (default stdout)");

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Monte-Carlo error table on synthetic data");
  b->add_option("--scheme", bn.schemes)->delimiter(',');
  b->add_option("--grid", bn.grid, "key=v1,v2;... over I N r k s gamma delta decay drm");
  b->add_option("--trials", bn.trials);
  b->add_option("--seed", bn.seed);
  b->add_option("--threads", bn.threads);
  b->add_flag("--truncate", bn.truncate, "Also report recoveries truncated to r");
  b->add_option("--max-elements", bn.max_elements);
  b->add_option("--out", bn.out, "Table path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g->parsed()) run_gen(gen);
    if (pt->parsed()) run_partition(part);
    if (s->parsed()) run_sketch(sk);
    if (m->parsed()) run_merge(mg);
    if (r->parsed()) run_recover(rc);
    if (b->parsed()) run_bench(bn);
  } catch (const Failure& f) {
    std::cerr << "tks: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "tks: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
