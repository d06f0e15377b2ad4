#ifndef SHAPEGRAD_H
#define SHAPEGRAD_H

#include <stdbool.h>
#include <stddef.h>

/*
 Result of every call. The numeric values of `SG_STATUS_CONFIG`, `SG_STATUS_NUMERICAL`
 and `SG_STATUS_VALIDATION_FAILED` match the command-line exit codes.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  /*
   Null pointer, invalid UTF-8 or out-of-range index.
   */
  SG_STATUS_INVALID_ARGUMENT = 1,
  /*
   Configuration, data or mesh input rejected.
   */
  SG_STATUS_CONFIG = 2,
  /*
   Singular system, Newton failure or degenerate flow.
   */
  SG_STATUS_NUMERICAL = 3,
  /*
   The run completed but at least one check failed.
   */
  SG_STATUS_VALIDATION_FAILED = 4,
  SG_STATUS_IO = 5,
  SG_STATUS_PANIC = 6,
} SgStatus;

/*
 What [`sg_run`] computes.
 */
typedef enum SgCommand {
  SG_COMMAND_SOLVE = 0,
  SG_COMMAND_DERIVE = 1,
  SG_COMMAND_VALIDATE = 2,
} SgCommand;

typedef struct SgConfig SgConfig;

typedef struct SgMesh SgMesh;

typedef struct SgReport SgReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent failure on this thread; empty if none.
 Valid until the next failing call on the same thread.
 */
const char *sg_last_error(void);

/*
 Library version as a static string.
 */
const char *sg_version(void);

/*
 Releases a string returned as `char *`. Null is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void sg_string_free(char *s);

/*
 Structured disk mesh.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SgStatus sg_mesh_disk(double cx, double cy, double radius, size_t refine, struct SgMesh **out);

/*
 Crossed rectangle mesh with `(nx + 1)(ny + 1) + nx ny` nodes.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum SgStatus sg_mesh_rect(double x0,
                           double y0,
                           double x1,
                           double y1,
                           size_t nx,
                           size_t ny,
                           struct SgMesh **out);

/*
 Parses mesh text in the ASCII mesh format.

 # Safety
 `text` must be a nul-terminated string; `out` as for [`sg_mesh_disk`].
 */
enum SgStatus sg_mesh_parse(const char *text, struct SgMesh **out);

/*
 # Safety
 `mesh` must be a live handle or null.
 */
void sg_mesh_free(struct SgMesh *mesh);

/*
 Node and triangle counts.

 # Safety
 `mesh` must be a live handle; the outputs must be writable or null.
 */
enum SgStatus sg_mesh_counts(const struct SgMesh *mesh, size_t *nodes, size_t *triangles);

/*
 # Safety
 `mesh` must be a live handle and `out` writable.
 */
enum SgStatus sg_mesh_area(const struct SgMesh *mesh, double *out);

/*
 Content hash used to tag field files; release with [`sg_string_free`].

 # Safety
 `mesh` must be a live handle and `out` writable.
 */
enum SgStatus sg_mesh_hash(const struct SgMesh *mesh, char **out);

/*
 Mesh in the ASCII mesh format; release with [`sg_string_free`].

 # Safety
 `mesh` must be a live handle and `out` writable.
 */
enum SgStatus sg_mesh_to_text(const struct SgMesh *mesh, char **out);

/*
 Parses an INI run configuration. Relative paths inside it resolve against
 `base_dir`, or the working directory when `base_dir` is null.

 # Safety
 `text` and a non-null `base_dir` must be nul-terminated strings; `out` writable.
 */
enum SgStatus sg_config_parse(const char *text, const char *base_dir, struct SgConfig **out);

/*
 Reads and parses a configuration file.

 # Safety
 `path` must be a nul-terminated string; `out` writable.
 */
enum SgStatus sg_config_load(const char *path, struct SgConfig **out);

/*
 # Safety
 `config` must be a live handle or null.
 */
void sg_config_free(struct SgConfig *config);

/*
 Runs a command in memory; nothing is written to disk.

 The report is produced whenever the computation completes: the return
 value is `SG_STATUS_VALIDATION_FAILED` when a check failed, and `*out` is still
 set so the failing rows can be inspected.

 # Safety
 `config` must be a live handle and `out` writable.
 */
enum SgStatus sg_run(const struct SgConfig *config, enum SgCommand command, struct SgReport **out);

/*
 # Safety
 `report` must be a live handle or null.
 */
void sg_report_free(struct SgReport *report);

/*
 Whether every configured check passed.

 # Safety
 `report` must be a live handle and `out` writable.
 */
enum SgStatus sg_report_passed(const struct SgReport *report, bool *out);

/*
 Total shape derivative; `SG_STATUS_INVALID_ARGUMENT` for `solve` reports, which have none.

 # Safety
 `report` must be a live handle and `out` writable.
 */
enum SgStatus sg_report_dj(const struct SgReport *report, double *out);

/*
 JSON report, owned by `report`.

 # Safety
 `report` must be a live handle or null (which yields null).
 */
const char *sg_report_json(const struct SgReport *report);

/*
 Number of output files the command would write.

 # Safety
 `report` must be a live handle or null (which yields 0).
 */
size_t sg_report_file_count(const struct SgReport *report);

/*
 Name and contents of output file `index`, both owned by `report`.

 # Safety
 `report` must be a live handle; `name` and `contents` writable or null.
 */
enum SgStatus sg_report_file(const struct SgReport *report,
                             size_t index,
                             const char **name,
                             const char **contents);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHAPEGRAD_H */
