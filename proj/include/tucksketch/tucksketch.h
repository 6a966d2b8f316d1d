#ifndef TUCKSKETCH_H
#define TUCKSKETCH_H

/* C interface to the tucksketch library. Every function that can fail
 * returns a tks_status; on failure a description is available from
 * tks_last_error_message() on the same thread. Handles are owned by the
 * caller and released with the matching *_free function (NULL is ignored).
 * Modes are 0-based; tensor data is first-index-fastest. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(TKS_BUILDING_LIBRARY)
#define TKS_API __declspec(dllexport)
#else
#define TKS_API __declspec(dllimport)
#endif
#else
#define TKS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tks_status {
  TKS_OK = 0,
  TKS_ERR_INTERNAL = 1,
  TKS_ERR_INVALID_ARGUMENT = 2,
  TKS_ERR_IO = 3,
  TKS_ERR_FORMAT = 4,
  TKS_ERR_PARAM_MISMATCH = 5,
  TKS_ERR_RANK_INFEASIBLE = 6
} tks_status;

typedef enum tks_drm_kind {
  TKS_DRM_GAUSSIAN = 0,
  TKS_DRM_SPARSE = 1,
  TKS_DRM_SSRFT = 2,
  TKS_DRM_TRP = 3
} tks_drm_kind;

typedef enum tks_recovery_mode { TKS_ONE_PASS = 1, TKS_TWO_PASS = 2 } tks_recovery_mode;

typedef enum tks_scheme {
  TKS_SCHEME_LOW_RANK_NOISE = 0,
  TKS_SCHEME_SPARSE_LOW_RANK_NOISE = 1,
  TKS_SCHEME_POLY_DECAY = 2
} tks_scheme;

typedef struct tks_tensor tks_tensor;
typedef struct tks_sketch tks_sketch;
typedef struct tks_tucker tks_tucker;
typedef struct tks_stream_writer tks_stream_writer;

TKS_API const char* tks_last_error_message(void);
TKS_API const char* tks_version(void);
/* Parses "gaussian", "sparse", "ssrft" or "trp". */
TKS_API tks_status tks_parse_drm_kind(const char* name, tks_drm_kind* out);
/* Parses "low_rank_noise", "sparse_low_rank_noise", "poly_decay" (or lk/slk/spd). */
TKS_API tks_status tks_parse_scheme(const char* name, tks_scheme* out);

/* Tensors. data may be NULL for a zero tensor. */
TKS_API tks_status tks_tensor_create(size_t order, const int64_t* shape, const double* data, tks_tensor** out);
TKS_API tks_status tks_tensor_load(const char* path, tks_tensor** out);
TKS_API tks_status tks_tensor_save(const tks_tensor* x, const char* path);
/* Reads only the header. shape must hold 64 entries. */
TKS_API tks_status tks_tensor_peek_shape(const char* path, size_t* order, int64_t* shape);
TKS_API size_t tks_tensor_order(const tks_tensor* x);
TKS_API int64_t tks_tensor_extent(const tks_tensor* x, size_t mode);
TKS_API size_t tks_tensor_size(const tks_tensor* x);
TKS_API const double* tks_tensor_data(const tks_tensor* x);
/* Entries offset..offset+extent-1 along mode. */
TKS_API tks_status tks_tensor_slab(const tks_tensor* x, size_t mode, int64_t offset, int64_t extent,
                                   tks_tensor** out);
TKS_API double tks_tensor_norm(const tks_tensor* x);
TKS_API void tks_tensor_free(tks_tensor* x);

typedef struct tks_sketch_params {
  size_t order;
  const int64_t* k;
  const int64_t* s;
  uint64_t seed;
  tks_drm_kind factor_kind;
  tks_drm_kind core_kind;
  tks_drm_kind trp_constituent;
  double density;
} tks_sketch_params;

/* k = 2r+1, s = 2k+1 into caller buffers of length order. */
TKS_API tks_status tks_default_sizes(size_t order, const int64_t* rank, int64_t* k, int64_t* s);
/* Validates params against a shape; returns the number of warnings, each
 * retrievable with tks_params_warning until the next call on this thread. */
TKS_API tks_status tks_params_check(size_t order, const int64_t* shape, const tks_sketch_params* params,
                                    size_t* n_warnings);
TKS_API const char* tks_params_warning(size_t i);

TKS_API tks_status tks_sketch_tensor(const tks_tensor* x, const tks_sketch_params* params, tks_sketch** out);
TKS_API tks_status tks_sketch_empty(size_t order, const int64_t* shape, const tks_sketch_params* params,
                                    tks_sketch** out);
/* sk <- theta1*sk + theta2*sketch(f). */
TKS_API tks_status tks_sketch_update(tks_sketch* sk, const tks_tensor* f, double theta1, double theta2);
/* As above for f zero outside a slab along mode starting at offset. */
TKS_API tks_status tks_sketch_update_slab(tks_sketch* sk, size_t mode, int64_t offset, const tks_tensor* slab,
                                          double theta1, double theta2);
/* Replays an update stream file into a fresh sketch, one record at a time. */
TKS_API tks_status tks_sketch_stream(const char* path, const tks_sketch_params* params, tks_sketch** out);
TKS_API tks_status tks_sketch_merge(const tks_sketch* a, const tks_sketch* b, tks_sketch** out);
TKS_API tks_status tks_sketch_load(const char* path, tks_sketch** out);
TKS_API tks_status tks_sketch_save(const tks_sketch* sk, const char* path);
TKS_API size_t tks_sketch_order(const tks_sketch* sk);
TKS_API int64_t tks_sketch_extent(const tks_sketch* sk, size_t mode);
TKS_API int64_t tks_sketch_k(const tks_sketch* sk, size_t mode);
TKS_API int64_t tks_sketch_s(const tks_sketch* sk, size_t mode);
TKS_API uint64_t tks_sketch_seed(const tks_sketch* sk);
/* Scalars held by the sketch: sum I_n k_n + prod s_n. */
TKS_API int64_t tks_sketch_storage(const tks_sketch* sk);
/* Largest elementwise difference of two sketches of equal shape and sizes,
 * relative to the largest magnitude in a. */
TKS_API tks_status tks_sketch_compare(const tks_sketch* a, const tks_sketch* b, double* rel_diff);
TKS_API void tks_sketch_free(tks_sketch* sk);

#define TKS_MAX_ORDER 64

typedef struct tks_recovery_info {
  int passes;
  /* HOOI sweeps of the truncation, 0 without one. */
  int iterations;
  size_t order;
  double core_residuals[TKS_MAX_ORDER];
  size_t n_core_residuals;
  int64_t completed_modes[TKS_MAX_ORDER];
  size_t n_completed_modes;
} tks_recovery_info;

/* x is required for TKS_TWO_PASS and ignored otherwise. trunc_rank may be
 * NULL; otherwise the result is truncated to that rank with HOOI. info may
 * be NULL. */
TKS_API tks_status tks_recover(const tks_sketch* sk, const tks_tensor* x, tks_recovery_mode mode,
                               const int64_t* trunc_rank, tks_tucker** out, tks_recovery_info* info);
TKS_API tks_status tks_tucker_load(const char* path, tks_tucker** out);
TKS_API tks_status tks_tucker_save(const tks_tucker* t, const char* path);
TKS_API size_t tks_tucker_order(const tks_tucker* t);
TKS_API int64_t tks_tucker_rank(const tks_tucker* t, size_t mode);
TKS_API int64_t tks_tucker_extent(const tks_tucker* t, size_t mode);
TKS_API tks_status tks_tucker_to_dense(const tks_tucker* t, tks_tensor** out);
/* ||x - [[t]]||_F / ||x||_F. */
TKS_API tks_status tks_tucker_error(const tks_tucker* t, const tks_tensor* x, double* out);
TKS_API void tks_tucker_free(tks_tucker* t);

/* Update stream files. */
TKS_API tks_status tks_stream_writer_open(const char* path, size_t order, const int64_t* shape,
                                          tks_stream_writer** out);
TKS_API tks_status tks_stream_write_full(tks_stream_writer* w, const tks_tensor* x, double theta1, double theta2);
TKS_API tks_status tks_stream_write_slab(tks_stream_writer* w, size_t mode, int64_t offset, const tks_tensor* slab,
                                         double theta1, double theta2);
/* Reads only the header of an update stream. shape must hold 64 entries. */
TKS_API tks_status tks_stream_peek_shape(const char* path, size_t* order, int64_t* shape);
/* Publishes the file. Freeing an uncommitted writer discards it. */
TKS_API tks_status tks_stream_commit(tks_stream_writer* w);
TKS_API void tks_stream_writer_free(tks_stream_writer* w);

typedef struct tks_synthetic_spec {
  tks_scheme scheme;
  double gamma;
  double delta;
  double decay;
  int64_t side;
  int64_t order;
  int64_t rank;
  uint64_t seed;
} tks_synthetic_spec;

/* Library defaults for the given scheme. */
TKS_API tks_synthetic_spec tks_synthetic_defaults(tks_scheme scheme);
TKS_API tks_status tks_generate(const tks_synthetic_spec* spec, tks_tensor** out);

typedef struct tks_bench_cell {
  tks_synthetic_spec data;
  int64_t k;
  int64_t s;
  tks_drm_kind drm;
} tks_bench_cell;

typedef struct tks_bench_options {
  int trials;
  uint64_t seed;
  int truncate;
  int threads;
  int64_t max_elements;
} tks_bench_options;

TKS_API tks_bench_options tks_bench_defaults(void);
/* Runs the grid and writes the result table to path ("-" for stdout). */
TKS_API tks_status tks_bench_run(const tks_bench_cell* cells, size_t n_cells, const tks_bench_options* options,
                                 const char* path);

#ifdef __cplusplus
}
#endif

#endif
