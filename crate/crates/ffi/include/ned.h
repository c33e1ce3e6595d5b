#ifndef NED_H
#define NED_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Values per expression frame.
#define NED_EXPR_DIM 51

// Values per style vector.
#define NED_STYLE_DIM 16

// Number of emotion labels accepted by [`ned_style_for_label`].
#define NED_NUM_EMOTIONS 7

typedef enum NedStatus {
  NED_STATUS_OK = 0,
  NED_STATUS_NULL_POINTER = 1,
  NED_STATUS_INVALID_ARGUMENT = 2,
  NED_STATUS_SHAPE = 3,
  NED_STATUS_IO = 4,
  NED_STATUS_FORMAT = 5,
  NED_STATUS_PARSE = 6,
  NED_STATUS_DIVERGENCE = 7,
  NED_STATUS_PANIC = 8,
} NedStatus;

// A trained model loaded from a checkpoint.
typedef struct NedModel NedModel;

// An expression track of `frames × NED_EXPR_DIM` values.
typedef struct NedTrack NedTrack;

// Similarity transform `p ↦ scale · R(rotation) · p + (tx, ty)`.
typedef struct NedSimilarity {
  double scale;
  double rotation;
  double tx;
  double ty;
} NedSimilarity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ned_last_error(void);

// Library version as a static NUL-terminated string.
const char *ned_version(void);

// Loads a checkpoint written by the trainer.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum NedStatus ned_model_load(const char *path, struct NedModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`ned_model_load`] and not have been freed.
void ned_model_free(struct NedModel *model);

// Window length the model was trained on, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ned_model_window(const struct NedModel *model);

// Copies `frames × NED_EXPR_DIM` values into a new track.
//
// # Safety
// `data` must point to that many floats and `out` must be valid.
enum NedStatus ned_track_new(const float *data, size_t frames, struct NedTrack **out);

// Reads a track CSV.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum NedStatus ned_track_read(const char *path, struct NedTrack **out);

// Writes a track CSV.
//
// # Safety
// `track` must be a live handle and `path` a NUL-terminated string.
enum NedStatus ned_track_write(const struct NedTrack *track, const char *path);

// Number of frames, or 0 for a null handle.
//
// # Safety
// `track` must be null or a live handle.
size_t ned_track_frames(const struct NedTrack *track);

// Row-major frame data, valid while the handle lives, or null for a null handle.
//
// # Safety
// `track` must be null or a live handle.
const float *ned_track_data(const struct NedTrack *track);

// Releases a track. Null is ignored.
//
// # Safety
// `track` must come from this library and not have been freed.
void ned_track_free(struct NedTrack *track);

// Target style for emotion `label` (0 to `NED_NUM_EMOTIONS - 1`) from the mapping
// network, with the latent code drawn from `seed`. Writes `NED_STYLE_DIM` floats.
//
// # Safety
// `model` must be a live handle and `style_out` must hold `NED_STYLE_DIM` floats.
enum NedStatus ned_style_for_label(const struct NedModel *model,
                                   uint32_t label,
                                   uint64_t seed,
                                   float *style_out);

// Style of a reference track. Writes `NED_STYLE_DIM` floats.
//
// # Safety
// `model` and `reference` must be live handles and `style_out` must hold `NED_STYLE_DIM` floats.
enum NedStatus ned_style_from_reference(const struct NedModel *model,
                                        const struct NedTrack *reference,
                                        float *style_out);

// Translates `track` toward `style` (`NED_STYLE_DIM` floats) into a new track.
//
// # Safety
// Handles must be live, `style` must hold `NED_STYLE_DIM` floats and `out` must be valid.
enum NedStatus ned_translate(const struct NedModel *model,
                             const struct NedTrack *track,
                             const float *style,
                             struct NedTrack **out);

// Correlation of the jaw channel between two tracks of equal length.
//
// # Safety
// Handles must be live and `out` must be valid.
enum NedStatus ned_jaw_pcc(const struct NedTrack *a, const struct NedTrack *b, double *out);

// Geometric median of `count` points of `dim` coordinates stored row-major.
//
// # Safety
// `points` must hold `count × dim` doubles and `out` must hold `dim` doubles.
enum NedStatus ned_geometric_median(const double *points, size_t count, size_t dim, double *out);

// Least-squares similarity transform taking `src` onto `dst`, each `count` (x, y) pairs.
//
// # Safety
// `src` and `dst` must hold `2 × count` doubles and `out` must be valid.
enum NedStatus ned_estimate_similarity(const double *src,
                                       const double *dst,
                                       size_t count,
                                       struct NedSimilarity *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NED_H */
