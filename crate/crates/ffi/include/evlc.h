#ifndef EVLC_H
#define EVLC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EvlcStatus {
  EVLC_STATUS_OK = 0,
  EVLC_STATUS_NULL_POINTER = 1,
  EVLC_STATUS_INVALID_ARGUMENT = 2,
  EVLC_STATUS_INSUFFICIENT_DATA = 3,
  EVLC_STATUS_DEGENERATE = 4,
  EVLC_STATUS_INTERNAL = 5,
} EvlcStatus;

typedef enum EvlcModel {
  /**
   * Constant image-plane flow (vx, vy) in px/s.
   */
  EVLC_MODEL_FLOW2 = 0,
  /**
   * Constant angular velocity (wx, wy, wz) in rad/s.
   */
  EVLC_MODEL_ROT3 = 1,
} EvlcModel;

/**
 * Detections of one frame.
 */
typedef struct EvlcDetections EvlcDetections;

/**
 * Marker ID to world position.
 */
typedef struct EvlcMarkerMap EvlcMarkerMap;

/**
 * Time-sorted event stream.
 */
typedef struct EvlcStream EvlcStream;

typedef struct EvlcEvent {
  uint64_t t_us;
  uint16_t x;
  uint16_t y;
  /**
   * +1 or -1.
   */
  int8_t polarity;
} EvlcEvent;

typedef struct EvlcIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint16_t width;
  uint16_t height;
} EvlcIntrinsics;

typedef struct EvlcDetection {
  uint64_t id;
  uint64_t t_us;
  double cx;
  double cy;
  /**
   * Inclusive pixel bounds.
   */
  uint16_t x_min;
  uint16_t y_min;
  uint16_t x_max;
  uint16_t y_max;
  uint32_t pixel_count;
} EvlcDetection;

/**
 * Camera-to-world pose: `rotation` is row-major, `translation` is the
 * camera center.
 */
typedef struct EvlcPose {
  double rotation[9];
  double translation[3];
  double rms_px;
} EvlcPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *evlc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *evlc_version(void);

/**
 * Builds a stream from `n` events, which must be sorted by time and lie
 * inside the sensor.
 *
 * # Safety
 * `events` must point to `n` readable `EvlcEvent`s (or may be null when
 * `n` is 0); `out` must be a valid pointer.
 */
enum EvlcStatus evlc_stream_new(uint16_t width,
                                uint16_t height,
                                const struct EvlcEvent *events,
                                size_t n,
                                struct EvlcStream **out);

/**
 * # Safety
 * `s` must be null or a handle from `evlc_stream_new` not yet freed.
 */
void evlc_stream_free(struct EvlcStream *s);

/**
 * Number of events, 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live stream handle.
 */
size_t evlc_stream_len(const struct EvlcStream *s);

struct EvlcMarkerMap *evlc_markers_new(void);

/**
 * Adds or replaces a marker.
 *
 * # Safety
 * `m` must be a live marker-map handle.
 */
enum EvlcStatus evlc_markers_insert(struct EvlcMarkerMap *m,
                                    uint64_t id,
                                    double x,
                                    double y,
                                    double z);

/**
 * # Safety
 * `m` must be null or a handle from `evlc_markers_new` not yet freed.
 */
void evlc_markers_free(struct EvlcMarkerMap *m);

/**
 * Decodes marker IDs from the events in `[t_frame - window_us, t_frame]`
 * and clusters them into detections. With `compensate` the window is first
 * motion-compensated using `model`.
 *
 * # Safety
 * `s` and `k` must be valid; `out` must be a valid pointer. The returned
 * handle is released with `evlc_detections_free`.
 */
enum EvlcStatus evlc_decode(const struct EvlcStream *s,
                            const struct EvlcIntrinsics *k,
                            uint64_t t_frame,
                            uint64_t window_us,
                            bool compensate,
                            enum EvlcModel model_kind,
                            struct EvlcDetections **out);

/**
 * # Safety
 * `d` must be null or a live detections handle.
 */
size_t evlc_detections_len(const struct EvlcDetections *d);

/**
 * Copies detection `i` into `out`.
 *
 * # Safety
 * `d` must be a live detections handle and `out` a valid pointer.
 */
enum EvlcStatus evlc_detections_get(const struct EvlcDetections *d,
                                    size_t i,
                                    struct EvlcDetection *out);

/**
 * # Safety
 * `d` must be null or a handle from `evlc_decode` not yet freed.
 */
void evlc_detections_free(struct EvlcDetections *d);

/**
 * Contrast-maximization motion estimate for the events in `[t0, t1]`,
 * referenced to `t1`. Writes `dim` parameters (2 for flow, 3 for rotation)
 * into `params`, which must hold at least 3 values.
 *
 * # Safety
 * `s` and `k` must be valid; `params` must point to 3 writable doubles;
 * `dim` and `contrast` may be null.
 */
enum EvlcStatus evlc_estimate_motion(const struct EvlcStream *s,
                                     const struct EvlcIntrinsics *k,
                                     uint64_t t0,
                                     uint64_t t1,
                                     enum EvlcModel model_kind,
                                     double *params,
                                     size_t *dim,
                                     double *contrast);

/**
 * Camera pose from detections of known markers (at least 4 distinct IDs).
 *
 * # Safety
 * All pointers must be valid handles or structs.
 */
enum EvlcStatus evlc_solve_pnp(const struct EvlcDetections *d,
                               const struct EvlcMarkerMap *m,
                               const struct EvlcIntrinsics *k,
                               struct EvlcPose *out);

/**
 * Longest blink pattern in microseconds for the default protocol; decode
 * windows must be at least this long.
 */
uint64_t evlc_min_window_us(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVLC_H */
