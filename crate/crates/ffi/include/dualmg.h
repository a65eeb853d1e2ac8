#ifndef DUALMG_H
#define DUALMG_H

/* Generated by cbindgen from the dualmg-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum DualmgStatus {
  DUALMG_STATUS_OK = 0,
  DUALMG_STATUS_NULL_ARGUMENT = 1,
  DUALMG_STATUS_INVALID_ARGUMENT = 2,
  DUALMG_STATUS_IO_ERROR = 3,
  DUALMG_STATUS_BUILD_FAILED = 4,
  DUALMG_STATUS_SOLVE_FAILED = 5,
} DualmgStatus;

// Benchmark problem kinds exposed through the C interface.
typedef enum DualmgProblemKind {
  DUALMG_PROBLEM_KIND_COOK = 0,
  DUALMG_PROBLEM_KIND_FACE = 1,
} DualmgProblemKind;

// Opaque mesh handle.
typedef struct DualmgMesh DualmgMesh;

// Opaque problem handle: a benchmark geometry with its loads.
typedef struct DualmgProblem DualmgProblem;

// Solve statistics reported back to the caller.
typedef struct DualmgSolveStats {
  uint64_t iterations;
  uint8_t converged;
  double initial_residual;
  double final_residual;
  // Geometric-mean residual contraction per cycle.
  double contraction;
  // Total dofs on the finest level.
  uint64_t fine_dofs;
} DualmgSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static C string.
const char *dualmg_version(void);

// Copies the last error message of this thread into `buf` (truncated to
// `len` bytes including the terminator). Returns the untruncated length.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null.
uintptr_t dualmg_last_error(char *buf, uintptr_t len);

// Loads a mesh from the plain-text format (`V T B` header, vertex lines,
// triangle lines, boundary lines `v0 v1 N|D`).
//
// # Safety
// `path` must be a valid C string; `out` must be a valid pointer.
enum DualmgStatus dualmg_mesh_load(const char *path, struct DualmgMesh **out);

// Writes a mesh in the plain-text format.
//
// # Safety
// `mesh` must be a live handle; `path` a valid C string.
enum DualmgStatus dualmg_mesh_write(const struct DualmgMesh *mesh, const char *path);

// Vertex, triangle and boundary-edge counts of a mesh.
//
// # Safety
// `mesh` must be a live handle; count pointers may be null to skip them.
enum DualmgStatus dualmg_mesh_counts(const struct DualmgMesh *mesh,
                                     uint64_t *vertices,
                                     uint64_t *triangles,
                                     uint64_t *boundary_edges);

// Releases a mesh handle.
//
// # Safety
// `mesh` must come from `dualmg_mesh_load` and not be freed twice.
void dualmg_mesh_free(struct DualmgMesh *mesh);

// Creates a benchmark problem handle.
//
// # Safety
// `out` must be a valid pointer.
enum DualmgStatus dualmg_problem_create(enum DualmgProblemKind kind, struct DualmgProblem **out);

// Releases a problem handle.
//
// # Safety
// `problem` must come from `dualmg_problem_create` and not be freed twice.
void dualmg_problem_free(struct DualmgProblem *problem);

// Total dofs (stress plus multipliers) after `refinements` uniform
// refinements of the problem's coarse mesh.
//
// # Safety
// `problem` must be a live handle; `out` a valid pointer.
enum DualmgStatus dualmg_problem_dofs(const struct DualmgProblem *problem,
                                      uint32_t refinements,
                                      uint64_t *out);

// Solves the problem with the patch-smoothed multigrid method.
//
// `mode` is 0 for V-cycles, 1 for the two-grid method; `alpha` is the Robin
// parameter of the smoother. Non-convergence within `max_cycles` is
// reported through `stats.converged`, not as an error status.
//
// # Safety
// `problem` must be a live handle; `stats` a valid pointer.
enum DualmgStatus dualmg_solve_multigrid(const struct DualmgProblem *problem,
                                         uint32_t refinements,
                                         int mode,
                                         double alpha,
                                         uint32_t pre_smooth,
                                         uint32_t post_smooth,
                                         double tol,
                                         uint32_t max_cycles,
                                         struct DualmgSolveStats *stats);

// Solves the problem directly on the refined mesh and reports the residual.
//
// # Safety
// `problem` must be a live handle; `stats` a valid pointer.
enum DualmgStatus dualmg_solve_direct(const struct DualmgProblem *problem,
                                      uint32_t refinements,
                                      struct DualmgSolveStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DUALMG_H */
