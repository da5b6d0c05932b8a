#ifndef DEEPGRAPH_H
#define DEEPGRAPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DgStatus {
  DG_STATUS_OK = 0,
  DG_STATUS_NULL_POINTER = 1,
  DG_STATUS_INVALID_ARGUMENT = 2,
  DG_STATUS_NUMERICAL = 3,
  DG_STATUS_IO = 4,
  DG_STATUS_FORMAT = 5,
  DG_STATUS_PROVENANCE = 6,
  DG_STATUS_PANIC = 7,
} DgStatus;

typedef struct DgGraph DgGraph;

typedef struct DgHks DgHks;

typedef struct DgModel DgModel;

// Descriptor statistics: HKS moments, bin count, and pixel moments when
// loaded from a run directory.
typedef struct DgStats DgStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call into this library on the same thread.
const char *dg_last_error_message(void);

// Builds an undirected simple graph on `n_nodes` nodes from `n_edges`
// pairs `(src[i], dst[i])`.
//
// # Safety
// `src` and `dst` must point to `n_edges` values; `out` must be writable.
enum DgStatus dg_graph_from_edges(size_t n_nodes,
                                  const size_t *src,
                                  const size_t *dst,
                                  size_t n_edges,
                                  struct DgGraph **out);

// # Safety
// `g` must be null or come from this library and not be freed yet.
void dg_graph_free(struct DgGraph *g);

// # Safety
// `g` must be a live graph; the out pointers must be writable.
enum DgStatus dg_graph_size(const struct DgGraph *g, size_t *n_nodes, size_t *n_edges);

// Induced subgraph on the nodes within `k` hops of `center`.
//
// # Safety
// `g` must be a live graph and `out` writable.
enum DgStatus dg_graph_ego_net(const struct DgGraph *g,
                               size_t center,
                               size_t k,
                               struct DgGraph **out);

// Heat kernel signature at `n_steps` log-spaced times from `t_first` to
// `t_last`. `max_eigenpairs` of 0 uses the full spectrum.
//
// # Safety
// `g` must be a live graph and `out` writable.
enum DgStatus dg_hks_compute(const struct DgGraph *g,
                             double t_first,
                             double t_last,
                             size_t n_steps,
                             size_t max_eigenpairs,
                             struct DgHks **out);

// Copies the node-by-step matrix row-major into `buf`, which must hold
// `rows * cols` values (see [`dg_hks_shape`]).
//
// # Safety
// `h` must be live and `buf` must point to `len` writable values.
enum DgStatus dg_hks_copy(const struct DgHks *h, double *buf, size_t len);

// # Safety
// `h` must be live; the out pointers must be writable.
enum DgStatus dg_hks_shape(const struct DgHks *h, size_t *rows, size_t *cols);

// # Safety
// `h` must be null or come from this library and not be freed yet.
void dg_hks_free(struct DgHks *h);

// Fits per-step statistics on `count` training signatures. The result
// has no pixel statistics, so descriptors built from it are raw.
//
// # Safety
// `hks` must point to `count` live signatures; `out` must be writable.
enum DgStatus dg_stats_fit(const struct DgHks *const *hks,
                           size_t count,
                           size_t n_bins,
                           struct DgStats **out);

// Loads the statistics written by `describe` into the run directory
// `dir`, checking that they belong to its training split.
//
// # Safety
// `dir` must be a nul-terminated string and `out` writable.
enum DgStatus dg_stats_load(const char *dir, struct DgStats **out);

// Bin and step counts of the descriptors these statistics produce.
//
// # Safety
// `s` must be live; the out pointers must be writable.
enum DgStatus dg_stats_shape(const struct DgStats *s, size_t *n_bins, size_t *n_steps);

// # Safety
// `s` must be null or come from this library and not be freed yet.
void dg_stats_free(struct DgStats *s);

// Writes the `n_bins * n_steps` descriptor of `h` row-major (bins by
// steps) into `buf`. With `normalize` nonzero the pixel statistics are
// applied, which requires statistics from [`dg_stats_load`].
//
// # Safety
// `h` and `s` must be live; `buf` must point to `len` writable values.
enum DgStatus dg_descriptor_compute(const struct DgHks *h,
                                    const struct DgStats *s,
                                    int32_t normalize,
                                    double *buf,
                                    size_t len);

// Loads a checkpoint written by `train`.
//
// # Safety
// `path` must be a nul-terminated string and `out` writable.
enum DgStatus dg_model_load(const char *path, struct DgModel **out);

// Length of one input row.
//
// # Safety
// `m` must be live and `len` writable.
enum DgStatus dg_model_input_len(const struct DgModel *m, size_t *len);

// Predicts `n_rows` scaled labels from row-major inputs of
// `n_rows * input_len` values.
//
// # Safety
// `m` must be live, `inputs` must hold `n_rows * input_len` values and
// `out` must have room for `n_rows`.
enum DgStatus dg_model_predict(const struct DgModel *m,
                               const double *inputs,
                               size_t n_rows,
                               double *out);

// # Safety
// `m` must be null or come from this library and not be freed yet.
void dg_model_free(struct DgModel *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPGRAPH_H */
