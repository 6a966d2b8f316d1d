#include "tucksketch/tucksketch.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <new>
#include <string>

#include "tucksketch/error.hpp"
#include "tucksketch/harness.hpp"
#include "tucksketch/io.hpp"
#include "tucksketch/recovery.hpp"
#include "tucksketch/sketch.hpp"

struct tks_tensor {
  tks::Tensor t;
};
struct tks_sketch {
  tks::TuckerSketch sk;
};
struct tks_tucker {
  tks::TuckerFactorization t;
};
struct tks_stream_writer {
  tks::io::UpdateStreamWriter w;
};

namespace {

thread_local std::string g_last_error;
thread_local std::vector<std::string> g_warnings;

template <typename F>
tks_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return TKS_OK;
  } catch (const tks::Error& e) {
    g_last_error = e.what();
    return static_cast<tks_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TKS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TKS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) { tks::require(p != nullptr, std::string(what) + " is NULL"); }

tks::Shape to_shape(size_t order, const int64_t* v, const char* what) {
  tks::require(order > 0 && order <= TKS_MAX_ORDER, std::string(what) + ": order must be in [1, 64]");
  need(v, what);
  return tks::Shape(v, v + order);
}

tks::DrmKind to_kind(tks_drm_kind k) {
  tks::require(k >= TKS_DRM_GAUSSIAN && k <= TKS_DRM_TRP, "unknown map kind");
  return static_cast<tks::DrmKind>(k);
}

tks::SketchParams to_params(const tks_sketch_params* p) {
  need(p, "params");
  tks::SketchParams out;
  out.k = to_shape(p->order, p->k, "k");
  out.s = to_shape(p->order, p->s, "s");
  out.master_seed = p->seed;
  out.factor_kind = to_kind(p->factor_kind);
  out.core_kind = to_kind(p->core_kind);
  out.trp_constituent = to_kind(p->trp_constituent);
  out.density = p->density;
  return out;
}

tks::SyntheticSpec to_spec(const tks_synthetic_spec* s) {
  need(s, "spec");
  tks::require(s->scheme >= TKS_SCHEME_LOW_RANK_NOISE && s->scheme <= TKS_SCHEME_POLY_DECAY, "unknown scheme");
  tks::SyntheticSpec out;
  out.scheme = static_cast<tks::Scheme>(s->scheme);
  out.gamma = s->gamma;
  out.delta = s->delta;
  out.decay = s->decay;
  out.side = s->side;
  out.order = s->order;
  out.rank = s->rank;
  out.seed = s->seed;
  return out;
}

std::size_t checked_mode(size_t mode, std::size_t order) {
  tks::require(mode < order, "mode " + std::to_string(mode) + " out of range for order " + std::to_string(order));
  return mode;
}

}  // namespace

extern "C" {

const char* tks_last_error_message(void) { return g_last_error.c_str(); }

const char* tks_version(void) { return "1.0.0"; }

tks_status tks_parse_drm_kind(const char* name, tks_drm_kind* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = static_cast<tks_drm_kind>(tks::parse_drm_kind(name));
  });
}

tks_status tks_parse_scheme(const char* name, tks_scheme* out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = static_cast<tks_scheme>(tks::parse_scheme(name));
  });
}

tks_status tks_tensor_create(size_t order, const int64_t* shape, const double* data, tks_tensor** out) {
  return guarded([&] {
    need(out, "out");
    tks::Shape s = to_shape(order, shape, "shape");
    for (auto e : s) tks::require(e >= 1, "extents must be positive");
    const auto n = static_cast<std::size_t>(tks::shape_product(s));
    std::vector<double> v(n, 0.0);
    if (data != nullptr) std::copy(data, data + n, v.begin());
    *out = new tks_tensor{tks::Tensor(std::move(s), std::move(v))};
  });
}

tks_status tks_tensor_load(const char* path, tks_tensor** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tks_tensor{tks::io::load_tensor(path)};
  });
}

tks_status tks_tensor_save(const tks_tensor* x, const char* path) {
  return guarded([&] {
    need(x, "tensor");
    need(path, "path");
    tks::io::save_tensor(path, x->t);
  });
}

tks_status tks_tensor_peek_shape(const char* path, size_t* order, int64_t* shape) {
  return guarded([&] {
    need(path, "path");
    need(order, "order");
    need(shape, "shape");
    const auto s = tks::io::peek_tensor_shape(path);
    *order = s.size();
    std::copy(s.begin(), s.end(), shape);
  });
}

size_t tks_tensor_order(const tks_tensor* x) { return x ? x->t.shape().size() : 0; }

int64_t tks_tensor_extent(const tks_tensor* x, size_t mode) {
  return x && mode < x->t.shape().size() ? x->t.shape()[mode] : 0;
}

size_t tks_tensor_size(const tks_tensor* x) { return x ? static_cast<size_t>(x->t.size()) : 0; }

const double* tks_tensor_data(const tks_tensor* x) { return x ? x->t.data().data() : nullptr; }

tks_status tks_tensor_slab(const tks_tensor* x, size_t mode, int64_t offset, int64_t extent, tks_tensor** out) {
  return guarded([&] {
    need(x, "tensor");
    need(out, "out");
    const auto m = checked_mode(mode, x->t.shape().size());
    const auto n = static_cast<tks::Index>(m);
    tks::require(extent >= 1 && offset >= 0 && offset + extent <= x->t.extent(n), "slab outside the tensor");
    tks::Shape shape = x->t.shape();
    shape[m] = extent;
    const tks::Matrix rows = tks::unfold(x->t, n).middleRows(offset, extent);
    *out = new tks_tensor{tks::fold(rows, n, shape)};
  });
}

double tks_tensor_norm(const tks_tensor* x) { return x ? tks::fro_norm(x->t) : 0.0; }

void tks_tensor_free(tks_tensor* x) { delete x; }

tks_status tks_default_sizes(size_t order, const int64_t* rank, int64_t* k, int64_t* s) {
  return guarded([&] {
    need(k, "k");
    need(s, "s");
    const auto p = tks::default_params(to_shape(order, rank, "rank"), 0);
    std::copy(p.k.begin(), p.k.end(), k);
    std::copy(p.s.begin(), p.s.end(), s);
  });
}

tks_status tks_params_check(size_t order, const int64_t* shape, const tks_sketch_params* params, size_t* n_warnings) {
  return guarded([&] {
    g_warnings = tks::validate(to_params(params), to_shape(order, shape, "shape"));
    if (n_warnings != nullptr) *n_warnings = g_warnings.size();
  });
}

const char* tks_params_warning(size_t i) { return i < g_warnings.size() ? g_warnings[i].c_str() : nullptr; }

tks_status tks_sketch_tensor(const tks_tensor* x, const tks_sketch_params* params, tks_sketch** out) {
  return guarded([&] {
    need(x, "tensor");
    need(out, "out");
    *out = new tks_sketch{tks::tucker_sketch(x->t, to_params(params))};
  });
}

tks_status tks_sketch_empty(size_t order, const int64_t* shape, const tks_sketch_params* params, tks_sketch** out) {
  return guarded([&] {
    need(out, "out");
    const auto s = to_shape(order, shape, "shape");
    const auto p = to_params(params);
    tks::validate(p, s);
    *out = new tks_sketch{tks::empty_sketch(s, p)};
  });
}

tks_status tks_sketch_update(tks_sketch* sk, const tks_tensor* f, double theta1, double theta2) {
  return guarded([&] {
    need(sk, "sketch");
    need(f, "tensor");
    sk->sk = tks::sketch_linear_update(sk->sk, f->t, theta1, theta2);
  });
}

tks_status tks_sketch_update_slab(tks_sketch* sk, size_t mode, int64_t offset, const tks_tensor* slab, double theta1,
                                  double theta2) {
  return guarded([&] {
    need(sk, "sketch");
    need(slab, "slab");
    const auto m = checked_mode(mode, sk->sk.shape.size());
    sk->sk = tks::sketch_slab_update(sk->sk, static_cast<tks::Index>(m), offset, slab->t, theta1, theta2);
  });
}

tks_status tks_sketch_stream(const char* path, const tks_sketch_params* params, tks_sketch** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    tks::io::UpdateStreamReader reader(path);
    const auto p = to_params(params);
    tks::validate(p, reader.shape());
    tks::TuckerSketch sk = tks::empty_sketch(reader.shape(), p);
    const tks::SketchMaps maps = tks::make_sketch_maps(sk.shape, p);
    while (auto rec = reader.next()) {
      if (rec->slab) {
        tks::sketch_slab_update(sk, maps, rec->mode, rec->offset, rec->data, rec->theta1, rec->theta2);
      } else {
        // A full record is the slab covering the whole of mode 0.
        tks::sketch_slab_update(sk, maps, 0, 0, rec->data, rec->theta1, rec->theta2);
      }
    }
    *out = new tks_sketch{std::move(sk)};
  });
}

tks_status tks_sketch_merge(const tks_sketch* a, const tks_sketch* b, tks_sketch** out) {
  return guarded([&] {
    need(a, "first sketch");
    need(b, "second sketch");
    need(out, "out");
    *out = new tks_sketch{tks::sketch_merge(a->sk, b->sk)};
  });
}

tks_status tks_sketch_load(const char* path, tks_sketch** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tks_sketch{tks::io::load_sketch(path)};
  });
}

tks_status tks_sketch_save(const tks_sketch* sk, const char* path) {
  return guarded([&] {
    need(sk, "sketch");
    need(path, "path");
    tks::io::save_sketch(path, sk->sk);
  });
}

size_t tks_sketch_order(const tks_sketch* sk) { return sk ? sk->sk.shape.size() : 0; }

int64_t tks_sketch_extent(const tks_sketch* sk, size_t mode) {
  return sk && mode < sk->sk.shape.size() ? sk->sk.shape[mode] : 0;
}

int64_t tks_sketch_k(const tks_sketch* sk, size_t mode) {
  return sk && mode < sk->sk.params.k.size() ? sk->sk.params.k[mode] : 0;
}

int64_t tks_sketch_s(const tks_sketch* sk, size_t mode) {
  return sk && mode < sk->sk.params.s.size() ? sk->sk.params.s[mode] : 0;
}

uint64_t tks_sketch_seed(const tks_sketch* sk) { return sk ? sk->sk.params.master_seed : 0; }

int64_t tks_sketch_storage(const tks_sketch* sk) { return sk ? tks::sketch_storage(sk->sk) : 0; }

tks_status tks_sketch_compare(const tks_sketch* a, const tks_sketch* b, double* rel_diff) {
  return guarded([&] {
    need(a, "first sketch");
    need(b, "second sketch");
    need(rel_diff, "rel_diff");
    const auto& x = a->sk;
    const auto& y = b->sk;
    tks::require(x.shape == y.shape && x.params.k == y.params.k && x.params.s == y.params.s,
                 "sketches have different dimensions");
    double scale = 0, diff = 0;
    for (std::size_t n = 0; n < x.factor_sketches.size(); ++n) {
      scale = std::max(scale, x.factor_sketches[n].cwiseAbs().maxCoeff());
      diff = std::max(diff, (x.factor_sketches[n] - y.factor_sketches[n]).cwiseAbs().maxCoeff());
    }
    const auto hx = x.core_sketch.data();
    const auto hy = y.core_sketch.data();
    for (std::size_t i = 0; i < hx.size(); ++i) {
      scale = std::max(scale, std::abs(hx[i]));
      diff = std::max(diff, std::abs(hx[i] - hy[i]));
    }
    *rel_diff = scale > 0 ? diff / scale : diff;
  });
}

void tks_sketch_free(tks_sketch* sk) { delete sk; }

tks_status tks_recover(const tks_sketch* sk, const tks_tensor* x, tks_recovery_mode mode, const int64_t* trunc_rank,
                       tks_tucker** out, tks_recovery_info* info) {
  return guarded([&] {
    need(sk, "sketch");
    need(out, "out");
    tks::RecoveryReport report;
    if (mode == TKS_TWO_PASS) {
      tks::require(x != nullptr, "two-pass recovery needs the input tensor");
      report = tks::two_pass_recover(x->t, sk->sk);
    } else {
      tks::require(mode == TKS_ONE_PASS, "unknown recovery mode");
      report = tks::one_pass_recover(sk->sk);
    }
    if (trunc_rank != nullptr) {
      const std::vector<tks::Index> rank(trunc_rank, trunc_rank + sk->sk.shape.size());
      report.factorization = tks::fixed_rank_truncate(report.factorization, rank, tks::TruncationMethod::hooi, {},
                                                      &report.iterations);
    }
    if (info != nullptr) {
      *info = tks_recovery_info{};
      info->passes = report.passes;
      info->iterations = report.iterations;
      info->order = sk->sk.shape.size();
      info->n_core_residuals = report.core_solver_residuals.size();
      std::copy(report.core_solver_residuals.begin(), report.core_solver_residuals.end(), info->core_residuals);
      info->n_completed_modes = report.completed_modes.size();
      std::copy(report.completed_modes.begin(), report.completed_modes.end(), info->completed_modes);
    }
    *out = new tks_tucker{std::move(report.factorization)};
  });
}

tks_status tks_tucker_load(const char* path, tks_tucker** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tks_tucker{tks::io::load_tucker(path)};
  });
}

tks_status tks_tucker_save(const tks_tucker* t, const char* path) {
  return guarded([&] {
    need(t, "factorization");
    need(path, "path");
    tks::io::save_tucker(path, t->t);
  });
}

size_t tks_tucker_order(const tks_tucker* t) { return t ? t->t.factors.size() : 0; }

int64_t tks_tucker_rank(const tks_tucker* t, size_t mode) {
  return t && mode < t->t.factors.size() ? t->t.factors[mode].cols() : 0;
}

int64_t tks_tucker_extent(const tks_tucker* t, size_t mode) {
  return t && mode < t->t.factors.size() ? t->t.factors[mode].rows() : 0;
}

tks_status tks_tucker_to_dense(const tks_tucker* t, tks_tensor** out) {
  return guarded([&] {
    need(t, "factorization");
    need(out, "out");
    *out = new tks_tensor{tks::tucker_to_dense(t->t)};
  });
}

tks_status tks_tucker_error(const tks_tucker* t, const tks_tensor* x, double* out) {
  return guarded([&] {
    need(t, "factorization");
    need(x, "tensor");
    need(out, "out");
    *out = tks::normalized_error(x->t, tks::tucker_to_dense(t->t));
  });
}

void tks_tucker_free(tks_tucker* t) { delete t; }

tks_status tks_stream_writer_open(const char* path, size_t order, const int64_t* shape, tks_stream_writer** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new tks_stream_writer{tks::io::UpdateStreamWriter(path, to_shape(order, shape, "shape"))};
  });
}

tks_status tks_stream_write_full(tks_stream_writer* w, const tks_tensor* x, double theta1, double theta2) {
  return guarded([&] {
    need(w, "writer");
    need(x, "tensor");
    w->w.write_full(x->t, theta1, theta2);
  });
}

tks_status tks_stream_write_slab(tks_stream_writer* w, size_t mode, int64_t offset, const tks_tensor* slab,
                                 double theta1, double theta2) {
  return guarded([&] {
    need(w, "writer");
    need(slab, "slab");
    w->w.write_slab(static_cast<tks::Index>(mode), offset, slab->t, theta1, theta2);
  });
}

tks_status tks_stream_peek_shape(const char* path, size_t* order, int64_t* shape) {
  return guarded([&] {
    need(path, "path");
    need(order, "order");
    need(shape, "shape");
    tks::io::UpdateStreamReader reader(path);
    *order = reader.shape().size();
    std::copy(reader.shape().begin(), reader.shape().end(), shape);
  });
}

tks_status tks_stream_commit(tks_stream_writer* w) {
  return guarded([&] {
    need(w, "writer");
    w->w.commit();
  });
}

void tks_stream_writer_free(tks_stream_writer* w) { delete w; }

tks_synthetic_spec tks_synthetic_defaults(tks_scheme scheme) {
  tks::SyntheticSpec d;
  return tks_synthetic_spec{scheme, d.gamma, d.delta, d.decay, d.side, d.order, d.rank, d.seed};
}

tks_status tks_generate(const tks_synthetic_spec* spec, tks_tensor** out) {
  return guarded([&] {
    need(out, "out");
    *out = new tks_tensor{tks::gen_synthetic(to_spec(spec))};
  });
}

tks_bench_options tks_bench_defaults(void) {
  tks::ExperimentOptions d;
  return tks_bench_options{d.trials, d.seed, d.truncate ? 1 : 0, d.threads, d.max_elements};
}

tks_status tks_bench_run(const tks_bench_cell* cells, size_t n_cells, const tks_bench_options* options,
                         const char* path) {
  return guarded([&] {
    need(cells, "cells");
    need(options, "options");
    need(path, "path");
    std::vector<tks::ExperimentCell> grid;
    for (size_t i = 0; i < n_cells; ++i)
      grid.push_back({to_spec(&cells[i].data), cells[i].k, cells[i].s, to_kind(cells[i].drm)});
    tks::ExperimentOptions opt;
    opt.trials = options->trials;
    opt.seed = options->seed;
    opt.truncate = options->truncate != 0;
    opt.threads = options->threads;
    opt.max_elements = options->max_elements;
    const auto rows = tks::run_experiment(grid, opt);
    if (std::string(path) == "-") {
      tks::write_result_table(std::cout, rows);
      std::cout.flush();
    } else {
      tks::io::save_text(path, [&](std::ostream& os) { tks::write_result_table(os, rows); });
    }
  });
}

}  // extern "C"
