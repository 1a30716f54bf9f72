#ifndef OPNET_H
#define OPNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Values 1–19 mirror the library's error kinds.
 */
typedef enum OpnetStatus {
  OPNET_STATUS_OK = 0,
  OPNET_STATUS_IO = 1,
  OPNET_STATUS_PARSE = 2,
  OPNET_STATUS_DEGENERATE_FACE = 3,
  OPNET_STATUS_INDEX_OUT_OF_RANGE = 4,
  OPNET_STATUS_REPEATED_INDEX = 5,
  OPNET_STATUS_ISOLATED_VERTEX = 6,
  OPNET_STATUS_NON_FINITE_COTANGENT = 7,
  OPNET_STATUS_K_TOO_LARGE = 8,
  OPNET_STATUS_EIGENSOLVE_FAILURE = 9,
  OPNET_STATUS_DIMENSION_MISMATCH = 10,
  OPNET_STATUS_NEGATIVE_SPECTRUM = 11,
  OPNET_STATUS_NON_DIAGONALIZABLE = 12,
  OPNET_STATUS_COMPLEX_BRANCH = 13,
  OPNET_STATUS_SINGULAR_MAP = 14,
  OPNET_STATUS_CONNECTIVITY_MISMATCH = 15,
  OPNET_STATUS_SHAPE_MISMATCH = 16,
  OPNET_STATUS_NON_FINITE_LOSS = 17,
  OPNET_STATUS_EMPTY_DATASET = 18,
  OPNET_STATUS_INVALID_ARGUMENT = 19,
  OPNET_STATUS_NULL_POINTER = 100,
  OPNET_STATUS_INVALID_UTF8 = 101,
  OPNET_STATUS_BUFFER_TOO_SMALL = 102,
  OPNET_STATUS_PANIC = 103,
} OpnetStatus;

typedef enum OpnetDiffKind {
  OPNET_DIFF_KIND_AREA = 0,
  OPNET_DIFF_KIND_CONFORMAL = 1,
  OPNET_DIFF_KIND_EXTRINSIC = 2,
} OpnetDiffKind;

typedef enum OpnetScheme {
  OPNET_SCHEME_MULTIPLICATIVE = 0,
  OPNET_SCHEME_LINEAR = 1,
} OpnetScheme;

/**
 * Laplace–Beltrami eigenbasis of one mesh.
 */
typedef struct OpnetBasis OpnetBasis;

/**
 * Triangle mesh.
 */
typedef struct OpnetMesh OpnetMesh;

/**
 * Trained decoder.
 */
typedef struct OpnetModel OpnetModel;

/**
 * One shape-difference operator.
 */
typedef struct OpnetShapeDiff OpnetShapeDiff;

/**
 * Reconstruction metrics.
 */
typedef struct OpnetMetrics {
  double d_r;
  double d_v;
  double d_e;
} OpnetMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *opnet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *opnet_version(void);

/**
 * Loads an OFF or OBJ file (format from the extension).
 */
enum OpnetStatus opnet_mesh_load(const char *path, struct OpnetMesh **out);

/**
 * Builds a mesh from `n_vertices × 3` coordinates and `n_faces × 3`
 * zero-based indices.
 */
enum OpnetStatus opnet_mesh_from_arrays(const double *vertices,
                                        size_t n_vertices,
                                        const uint32_t *faces,
                                        size_t n_faces,
                                        struct OpnetMesh **out);

enum OpnetStatus opnet_mesh_save(const struct OpnetMesh *mesh, const char *path);

/**
 * Vertex count, or 0 for NULL.
 */
size_t opnet_mesh_vertex_count(const struct OpnetMesh *mesh);

size_t opnet_mesh_face_count(const struct OpnetMesh *mesh);

/**
 * Copies the `n × 3` vertex coordinates into `out` (row-major).
 */
enum OpnetStatus opnet_mesh_vertices(const struct OpnetMesh *mesh, double *out, size_t len);

enum OpnetStatus opnet_mesh_volume(const struct OpnetMesh *mesh, double *out);

void opnet_mesh_free(struct OpnetMesh *mesh);

/**
 * The `k` lowest eigenpairs of the cotangent Laplacian.
 */
enum OpnetStatus opnet_basis_compute(const struct OpnetMesh *mesh,
                                     size_t k,
                                     struct OpnetBasis **out);

size_t opnet_basis_size(const struct OpnetBasis *basis);

/**
 * Copies the `k` eigenvalues (ascending) into `out`.
 */
enum OpnetStatus opnet_basis_eigenvalues(const struct OpnetBasis *basis, double *out, size_t len);

void opnet_basis_free(struct OpnetBasis *basis);

/**
 * Shape difference of `target` relative to `base` through the identity
 * correspondence (both meshes must have the same vertex count).
 */
enum OpnetStatus opnet_shapediff_compute(const struct OpnetMesh *base,
                                         const struct OpnetBasis *base_basis,
                                         const struct OpnetMesh *target,
                                         const struct OpnetBasis *target_basis,
                                         enum OpnetDiffKind kind,
                                         struct OpnetShapeDiff **out);

/**
 * Wraps a `k × k` row-major matrix.
 */
enum OpnetStatus opnet_shapediff_from_matrix(enum OpnetDiffKind kind,
                                             const double *data,
                                             size_t k,
                                             struct OpnetShapeDiff **out);

enum OpnetStatus opnet_shapediff_load(const char *path, struct OpnetShapeDiff **out);

enum OpnetStatus opnet_shapediff_save(const struct OpnetShapeDiff *d, const char *path);

size_t opnet_shapediff_size(const struct OpnetShapeDiff *d);

enum OpnetStatus opnet_shapediff_kind(const struct OpnetShapeDiff *d, enum OpnetDiffKind *out);

/**
 * Copies the `k × k` matrix row-major into `out`.
 */
enum OpnetStatus opnet_shapediff_matrix(const struct OpnetShapeDiff *d, double *out, size_t len);

/**
 * Operator at parameter `t ∈ [0, 1]` between `d0` and `d1`.
 */
enum OpnetStatus opnet_interpolate(const struct OpnetShapeDiff *d0,
                                   const struct OpnetShapeDiff *d1,
                                   double t,
                                   enum OpnetScheme scheme,
                                   struct OpnetShapeDiff **out);

/**
 * `D_C D_A⁺ D_B`.
 */
enum OpnetStatus opnet_analogy(const struct OpnetShapeDiff *da,
                               const struct OpnetShapeDiff *db,
                               const struct OpnetShapeDiff *dc,
                               struct OpnetShapeDiff **out);

void opnet_shapediff_free(struct OpnetShapeDiff *d);

/**
 * Coordinates recovered from the Gram operator of `mesh` in `basis`,
 * written as `n × 3` row-major.
 */
enum OpnetStatus opnet_recover_embedding(const struct OpnetMesh *mesh,
                                         const struct OpnetBasis *basis,
                                         double *out,
                                         size_t len);

enum OpnetStatus opnet_model_load(const char *path, struct OpnetModel **out);

/**
 * Number of output vertices, or 0 for NULL.
 */
size_t opnet_model_vertex_count(const struct OpnetModel *model);

/**
 * Decodes `n_channels` differences into `n × 3` coordinates (row-major).
 */
enum OpnetStatus opnet_model_reconstruct(const struct OpnetModel *model,
                                         const struct OpnetShapeDiff *const *channels,
                                         size_t n_channels,
                                         double *out,
                                         size_t len);

void opnet_model_free(struct OpnetModel *model);

/**
 * d_R, d_V and d_E of `n × 3` coordinates against `gt`.
 */
enum OpnetStatus opnet_evaluate(const struct OpnetMesh *gt,
                                const double *coords,
                                size_t n_vertices,
                                struct OpnetMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPNET_H */
