#ifndef VIZISCAN_H
#define VIZISCAN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum VizStatus {
  VIZ_STATUS_OK = 0,
  VIZ_STATUS_NULL_ARGUMENT = 1,
  VIZ_STATUS_INVALID_ARGUMENT = 2,
  VIZ_STATUS_IO = 3,
  VIZ_STATUS_PARSE = 4,
  VIZ_STATUS_EMPTY_INPUT = 5,
  VIZ_STATUS_NOT_WATERTIGHT = 6,
  VIZ_STATUS_UNREACHABLE = 7,
  VIZ_STATUS_GEOMETRY = 8,
  VIZ_STATUS_BUFFER_TOO_SMALL = 9,
  VIZ_STATUS_PANIC = 10,
} VizStatus;

typedef enum VizShape {
  /**
   * Icosphere of radius 0.5.
   */
  VIZ_SHAPE_SPHERE = 0,
  /**
   * Box 0.8 × 0.6 × 0.4.
   */
  VIZ_SHAPE_BOX = 1,
  /**
   * Open-top box 0.8 × 0.8 × 0.6 with walls 0.05 thick.
   */
  VIZ_SHAPE_CUP = 2,
} VizShape;

typedef enum VizMode {
  VIZ_MODE_RAW = 0,
  VIZ_MODE_SV = 1,
  VIZ_MODE_AP = 2,
  VIZ_MODE_SVAP = 3,
  VIZ_MODE_SENSOR_POS = 4,
  VIZ_MODE_UNNORM_SV = 5,
  VIZ_MODE_NORMALS = 6,
} VizMode;

typedef enum VizPlacement {
  VIZ_PLACEMENT_SYMMETRIC = 0,
  VIZ_PLACEMENT_MIDPOINT = 1,
  VIZ_PLACEMENT_GRAZING = 2,
} VizPlacement;

typedef enum VizMethod {
  VIZ_METHOD_CARVE = 0,
  VIZ_METHOD_DENSITY = 1,
} VizMethod;

/**
 * Augmented point cloud handle.
 */
typedef struct VizAugmented VizAugmented;

/**
 * Sensor-aware point cloud handle.
 */
typedef struct VizCloud VizCloud;

/**
 * Triangle mesh handle.
 */
typedef struct VizMesh VizMesh;

typedef struct VizScanConfig {
  size_t n_points;
  size_t n_sensors;
  double noise_sigma;
  double radius_factor_inner;
  double radius_factor_outer;
  bool hemisphere;
  uint64_t seed;
} VizScanConfig;

typedef struct VizAugmentConfig {
  enum VizMode mode;
  double ap_distance_multiplier;
  enum VizPlacement placement;
} VizAugmentConfig;

typedef struct VizMetrics {
  /**
   * Valid only when `has_iou` is true (both meshes watertight).
   */
  double iou;
  bool has_iou;
  double chamfer_x100;
  double normal_consistency;
} VizMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *viz_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next `viz_*` call on the same thread.
 */
const char *viz_last_error(void);

/**
 * Loads a PLY or OBJ mesh.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum VizStatus viz_mesh_load(const char *path, struct VizMesh **out);

/**
 * Builds a mesh from `n_vertices` xyz triples and `n_triangles` index triples.
 *
 * # Safety
 * `vertices` must hold `3 * n_vertices` doubles and `triangles`
 * `3 * n_triangles` indices; `out` must be writable.
 */
enum VizStatus viz_mesh_from_arrays(const double *vertices,
                                    size_t n_vertices,
                                    const uint32_t *triangles,
                                    size_t n_triangles,
                                    struct VizMesh **out);

/**
 * One of the procedural reference shapes, centred at the origin.
 *
 * # Safety
 * `out` must be writable.
 */
enum VizStatus viz_mesh_shape(enum VizShape shape, struct VizMesh **out);

/**
 * Writes a binary PLY.
 *
 * # Safety
 * `mesh` must be a live handle; `path` a NUL-terminated string.
 */
enum VizStatus viz_mesh_save(const struct VizMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must be a live handle or null.
 */
size_t viz_mesh_vertex_count(const struct VizMesh *mesh);

/**
 * # Safety
 * `mesh` must be a live handle or null.
 */
size_t viz_mesh_triangle_count(const struct VizMesh *mesh);

/**
 * True when every edge is shared by exactly two consistently wound triangles.
 *
 * # Safety
 * `mesh` must be a live handle or null.
 */
bool viz_mesh_is_watertight(const struct VizMesh *mesh);

/**
 * Copies `3 * vertex_count` doubles into `out`.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `capacity` doubles.
 */
enum VizStatus viz_mesh_copy_vertices(const struct VizMesh *mesh, double *out, size_t capacity);

/**
 * Copies `3 * triangle_count` indices into `out`.
 *
 * # Safety
 * `mesh` must be a live handle; `out` must hold `capacity` indices.
 */
enum VizStatus viz_mesh_copy_triangles(const struct VizMesh *mesh, uint32_t *out, size_t capacity);

/**
 * # Safety
 * `mesh` must come from a `viz_mesh_*` constructor and not be used afterwards.
 */
void viz_mesh_free(struct VizMesh *mesh);

/**
 * 3 000 points, 10 sensors, noise 0.005, radius factors 1.5 and 2.5, seed 0.
 */
struct VizScanConfig viz_scan_config_default(void);

/**
 * Virtually scans `mesh`.
 *
 * # Safety
 * `mesh` and `config` must be valid pointers; `out` must be writable.
 */
enum VizStatus viz_scan(const struct VizMesh *mesh,
                        const struct VizScanConfig *config,
                        struct VizCloud **out);

/**
 * Builds a cloud from `n` points and their sensors (xyz triples each).
 *
 * # Safety
 * `points` and `sensors` must hold `3 * n` doubles; `out` must be writable.
 */
enum VizStatus viz_cloud_from_arrays(const double *points,
                                     const double *sensors,
                                     size_t n,
                                     struct VizCloud **out);

/**
 * Reads a sensor-cloud PLY.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum VizStatus viz_cloud_load(const char *path, struct VizCloud **out);

/**
 * Writes a sensor-cloud PLY (with ground-truth normals when present).
 *
 * # Safety
 * `cloud` must be a live handle; `path` a NUL-terminated string.
 */
enum VizStatus viz_cloud_save(const struct VizCloud *cloud, const char *path);

/**
 * # Safety
 * `cloud` must be a live handle or null.
 */
size_t viz_cloud_len(const struct VizCloud *cloud);

/**
 * Copies `3 * len` doubles of point positions.
 *
 * # Safety
 * `cloud` must be a live handle; `out` must hold `capacity` doubles.
 */
enum VizStatus viz_cloud_copy_points(const struct VizCloud *cloud, double *out, size_t capacity);

/**
 * Copies `3 * len` doubles of sensor positions.
 *
 * # Safety
 * `cloud` must be a live handle; `out` must hold `capacity` doubles.
 */
enum VizStatus viz_cloud_copy_sensors(const struct VizCloud *cloud, double *out, size_t capacity);

/**
 * Mean nearest-neighbour distance of the cloud's points.
 *
 * # Safety
 * `cloud` must be a live handle; `out` must be writable.
 */
enum VizStatus viz_characteristic_distance(const struct VizCloud *cloud, double *out);

/**
 * # Safety
 * `cloud` must come from a `viz_cloud_*` or `viz_scan` call and not be used afterwards.
 */
void viz_cloud_free(struct VizCloud *cloud);

/**
 * SVAP, multiplier 1, symmetric placement.
 */
struct VizAugmentConfig viz_augment_config_default(void);

/**
 * Builds the channel layout for `config.mode`.
 *
 * # Safety
 * `cloud` and `config` must be valid pointers; `out` must be writable.
 */
enum VizStatus viz_augment(const struct VizCloud *cloud,
                           const struct VizAugmentConfig *config,
                           struct VizAugmented **out);

/**
 * # Safety
 * `aug` must be a live handle or null.
 */
size_t viz_augmented_rows(const struct VizAugmented *aug);

/**
 * # Safety
 * `aug` must be a live handle or null.
 */
size_t viz_augmented_width(const struct VizAugmented *aug);

/**
 * Copies the row-major channel matrix (`rows * width` doubles).
 *
 * # Safety
 * `aug` must be a live handle; `out` must hold `capacity` doubles.
 */
enum VizStatus viz_augmented_copy(const struct VizAugmented *aug, double *out, size_t capacity);

/**
 * # Safety
 * `aug` must come from `viz_augment` and not be used afterwards.
 */
void viz_augmented_free(struct VizAugmented *aug);

/**
 * Reconstructs a mesh at `resolution`³. `param` is the carving truncation
 * or density bandwidth; zero or negative selects the default.
 *
 * # Safety
 * `cloud` must be a live handle; `out` must be writable.
 */
enum VizStatus viz_reconstruct(const struct VizCloud *cloud,
                               enum VizMethod method,
                               size_t resolution,
                               double param,
                               struct VizMesh **out);

/**
 * IoU, Chamfer ×100 and normal consistency with `samples` points each.
 *
 * # Safety
 * `gt` and `pred` must be live handles; `out` must be writable.
 */
enum VizStatus viz_evaluate(const struct VizMesh *gt,
                            const struct VizMesh *pred,
                            size_t samples,
                            uint64_t seed,
                            struct VizMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VIZISCAN_H */
