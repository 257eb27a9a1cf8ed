#ifndef SEMISTEREO_H
#define SEMISTEREO_H

#include <stdint.h>
#include <stddef.h>

typedef enum {
  SS_STATUS_OK = 0,
  // A required pointer argument was null.
  SS_STATUS_NULL_POINTER = 1,
  // Invalid configuration or missing inputs.
  SS_STATUS_CONFIG = 2,
  // A generated or evaluated frame violates an invariant.
  SS_STATUS_INVARIANT = 3,
  SS_STATUS_IO = 4,
  // An argument is out of range or a buffer is too small.
  SS_STATUS_INVALID_ARGUMENT = 5,
  // A Rust panic was caught at the boundary.
  SS_STATUS_PANIC = 6,
} SsStatus;

// A dense single-channel float map, row-major, top row first.
typedef struct SsDisparityMap SsDisparityMap;

// One rendered stereo pair with its ground truth.
typedef struct SsFrame SsFrame;

// Scene, textures and rig built from one configuration.
typedef struct SsGenerator SsGenerator;

typedef struct {
  uint32_t width;
  uint32_t height;
  double f_px;
  double baseline_m;
  double ndisp;
  uint32_t frames;
} SsRigInfo;

typedef struct {
  double avgerr;
  double rms;
  // Percent of pixels with error above 1, 2 and 4 px.
  double bad_1;
  double bad_2;
  double bad_4;
  double d1_all;
  uint64_t pixel_count;
} SsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ss_version(void);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *ss_last_error(void);

// Builds a generator from a bundled preset such as `"middlebury-like"`.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a writable pointer.
SsStatus ss_generator_from_preset(const char *name, SsGenerator **out);

// Builds a generator from TOML text. Relative directories in the config
// resolve against `base_dir`, which may be null.
//
// # Safety
// `toml` and a non-null `base_dir` must be NUL-terminated strings; `out`
// must be writable.
SsStatus ss_generator_from_toml(const char *toml, const char *base_dir, SsGenerator **out);

// # Safety
// `gen` must be null or a handle from `ss_generator_from_*` not yet freed.
void ss_generator_free(SsGenerator *gen);

// # Safety
// `gen` must be a live generator handle and `out` writable.
SsStatus ss_generator_info(const SsGenerator *gen, SsRigInfo *out);

// Renders `frame` into a new frame handle.
//
// # Safety
// `gen` must be a live generator handle and `out` writable.
SsStatus ss_generator_render(const SsGenerator *gen, uint32_t frame, SsFrame **out);

// Writes every frame and the manifest under `root` using `workers` threads.
//
// # Safety
// `gen` must be a live generator handle and `root` a NUL-terminated path.
SsStatus ss_generator_generate(const SsGenerator *gen, const char *root, uint32_t workers);

// # Safety
// `frame` must be null or a handle from `ss_generator_render` not yet freed.
void ss_frame_free(SsFrame *frame);

// # Safety
// `frame` must be a live frame handle; `width` and `height` writable.
SsStatus ss_frame_size(const SsFrame *frame, uint32_t *width, uint32_t *height);

// Copies the left view as interleaved RGB8 (`3 * width * height` bytes).
//
// # Safety
// `frame` must be a live frame handle and `buf` hold `len` bytes.
SsStatus ss_frame_copy_left(const SsFrame *frame, uint8_t *buf, size_t len);

// Copies the right view as interleaved RGB8 (`3 * width * height` bytes).
//
// # Safety
// `frame` must be a live frame handle and `buf` hold `len` bytes.
SsStatus ss_frame_copy_right(const SsFrame *frame, uint8_t *buf, size_t len);

// Copies the left disparity map (`width * height` floats, pixels).
//
// # Safety
// `frame` must be a live frame handle and `buf` hold `len` floats.
SsStatus ss_frame_copy_disparity(const SsFrame *frame, float *buf, size_t len);

// Copies the occlusion mask (`width * height` bytes, 1 = occluded).
//
// # Safety
// `frame` must be a live frame handle and `buf` hold `len` bytes.
SsStatus ss_frame_copy_occlusion(const SsFrame *frame, uint8_t *buf, size_t len);

// Copies the foreground mask (`width * height` bytes, 1 = object).
//
// # Safety
// `frame` must be a live frame handle and `buf` hold `len` bytes.
SsStatus ss_frame_copy_foreground(const SsFrame *frame, uint8_t *buf, size_t len);

// Writes a `width` x `height` float map as little-endian PFM.
//
// # Safety
// `path` must be NUL-terminated and `data` hold `width * height` floats.
SsStatus ss_write_pfm(const char *path, const float *data, uint32_t width, uint32_t height);

// Reads a PFM file into a new map handle.
//
// # Safety
// `path` must be NUL-terminated and `out` writable.
SsStatus ss_read_pfm(const char *path, SsDisparityMap **out);

// # Safety
// `map` must be a live map handle; `width` and `height` writable.
SsStatus ss_map_size(const SsDisparityMap *map, uint32_t *width, uint32_t *height);

// Borrowed pointer to the map's `width * height` floats, valid until the
// map is freed. Null if `map` is null.
//
// # Safety
// `map` must be null or a live map handle.
const float *ss_map_data(const SsDisparityMap *map);

// # Safety
// `map` must be null or a handle from `ss_read_pfm` not yet freed.
void ss_map_free(SsDisparityMap *map);

// Scores `pred` against `gt`, both `width * height` floats. `mask` may be
// null (all pixels) or hold `width * height` bytes where nonzero selects.
//
// # Safety
// Buffers must have the sizes stated above and `out` must be writable.
SsStatus ss_evaluate(const float *pred,
                     const float *gt,
                     const uint8_t *mask,
                     uint32_t width,
                     uint32_t height,
                     SsMetrics *out);

// Baseline in meters for which depth `z_min` maps to `max_disp` pixels.
double ss_solve_baseline(double max_disp, double z_min, double f_px);

// Focal length in pixels from focal length and sensor width in millimeters.
double ss_f_px(double focal_mm, double sensor_width_mm, uint32_t width_px);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMISTEREO_H */
