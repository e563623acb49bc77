#ifndef CSNN_H
#define CSNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pixels in one normalized patch buffer (31 * 31).
 */
#define CSNN_PATCH_LEN 961

/**
 * Result code of every fallible call.
 */
typedef enum {
  CSNN_STATUS_OK = 0,
  /**
   * A pointer was null, a buffer had the wrong length, or a parameter
   * violated its documented range.
   */
  CSNN_STATUS_INVALID_ARGUMENT = 1,
  /**
   * File system failure.
   */
  CSNN_STATUS_IO = 2,
  /**
   * A persisted file failed to parse.
   */
  CSNN_STATUS_PARSE = 3,
  /**
   * Calibration could not reach the target rate.
   */
  CSNN_STATUS_UNREACHABLE = 4,
  CSNN_STATUS_INTERNAL = 5,
} CsnnStatus;

/**
 * Opaque learned kernel bank.
 */
typedef struct CsnnBank CsnnBank;

/**
 * Opaque columnar classifier head.
 */
typedef struct CsnnClassifier CsnnClassifier;

/**
 * Opaque fixed-weight convolution + pooling network.
 */
typedef struct CsnnNetwork CsnnNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Valid until the next
 * failing call; never null.
 */
const char *csnn_last_error(void);

/**
 * Side of a normalized patch in pixels (31).
 */
uint32_t csnn_patch_side(void);

/**
 * Normalize one annotated object from a grayscale frame: differential heat
 * map, square crop around the box, max-shrink to 31x31.
 *
 * `pixels` is row-major `width*height`; `out_patch` receives 31*31 bytes.
 *
 * # Safety
 * `pixels` and `out_patch` must point to buffers of the documented sizes.
 */
CsnnStatus csnn_preprocess(const uint8_t *pixels,
                           uint32_t width,
                           uint32_t height,
                           int64_t box_x,
                           int64_t box_y,
                           uint32_t box_w,
                           uint32_t box_h,
                           uint8_t *out_patch);

/**
 * Learn a kernel bank from `count` patches (flat `count*31*31` bytes).
 *
 * `learning_rate <= 0` derives the rate from the corpus size. On success
 * `*out` owns the bank; release it with [`csnn_bank_free`].
 *
 * # Safety
 * `patches` must hold `count` packed patches; `out` must be valid.
 */
CsnnStatus csnn_bank_learn(const uint8_t *patches,
                           uintptr_t count,
                           uint32_t kernel_count,
                           uint32_t kernel_size,
                           uint32_t stride,
                           uint8_t brightness_threshold,
                           double w_min,
                           double w_max,
                           double learning_rate,
                           uint64_t seed,
                           CsnnBank **out);

/**
 * Load a bank from its text format.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be valid.
 */
CsnnStatus csnn_bank_load(const char *path, uint32_t stride, CsnnBank **out);

/**
 * # Safety
 * `bank` must be a live handle; `path` a NUL-terminated UTF-8 string.
 */
CsnnStatus csnn_bank_save(const CsnnBank *bank, const char *path);

/**
 * # Safety
 * `bank` must be a live handle.
 */
uint32_t csnn_bank_kernel_count(const CsnnBank *bank);

/**
 * # Safety
 * `bank` must be a live handle.
 */
uint32_t csnn_bank_kernel_size(const CsnnBank *bank);

/**
 * Copy all kernel weights (kernel-major, row-major inside a kernel) into
 * `out`, which holds `len` doubles; `len` must equal
 * `kernel_count * kernel_size * kernel_size`.
 *
 * # Safety
 * `bank` must be a live handle and `out` must hold `len` doubles.
 */
CsnnStatus csnn_bank_weights(const CsnnBank *bank, double *out, uintptr_t len);

/**
 * # Safety
 * `bank` must be null or a handle produced by this library, not yet freed.
 */
void csnn_bank_free(CsnnBank *bank);

/**
 * Build the feature network from a bank at a fixed weight scale.
 *
 * # Safety
 * `bank` must be a live handle; `out` must be valid.
 */
CsnnStatus csnn_network_build(const CsnnBank *bank,
                              double scale,
                              bool use_max_pooling,
                              CsnnNetwork **out);

/**
 * Find the weight scale whose mean pooling rate lands within
 * `tolerance * target_hz` of `target_hz` on a sample of patches.
 *
 * # Safety
 * `bank` must be a live handle, `sample` holds `count` packed patches and
 * `out_scale` must be valid.
 */
CsnnStatus csnn_network_calibrate(const CsnnBank *bank,
                                  bool use_max_pooling,
                                  const uint8_t *sample,
                                  uintptr_t count,
                                  double target_hz,
                                  double tolerance,
                                  double *out_scale);

/**
 * Number of flattened pooling outputs.
 *
 * # Safety
 * `net` must be a live handle.
 */
uintptr_t csnn_network_output_len(const CsnnNetwork *net);

/**
 * Present one patch for a full 20 ms cycle and write each pooling node's
 * spike count into `out_counts` (`len` must equal the output length).
 *
 * # Safety
 * `net` must be a live handle, `patch` 31*31 bytes, `out_counts` `len`
 * entries.
 */
CsnnStatus csnn_network_transform(const CsnnNetwork *net,
                                  const uint8_t *patch,
                                  uint32_t *out_counts,
                                  uintptr_t len);

/**
 * # Safety
 * `net` must be null or a handle produced by this library, not yet freed.
 */
void csnn_network_free(CsnnNetwork *net);

/**
 * Create an untrained head. `inputs` must match the network's output
 * length it will be trained against.
 *
 * # Safety
 * `out` must be valid.
 */
CsnnStatus csnn_classifier_new(uint32_t num_classes,
                               uint32_t microcolumns_per_column,
                               uintptr_t inputs,
                               double learning_rate,
                               double weight_min,
                               double weight_max,
                               double bias_increment,
                               uint64_t seed,
                               CsnnClassifier **out);

/**
 * One training epoch over `count` labeled patches (single pass, in
 * order): each patch is run through the network and presented to the head
 * with its label.
 *
 * # Safety
 * Handles must be live; `patches` holds `count` packed patches and
 * `labels` `count` entries.
 */
CsnnStatus csnn_classifier_train_epoch(CsnnClassifier *classifier,
                                       const CsnnNetwork *net,
                                       const uint8_t *patches,
                                       const uint32_t *labels,
                                       uintptr_t count);

/**
 * Classify one patch; returns the class index, or a negative value on
 * error (inspect [`csnn_last_error`]).
 *
 * # Safety
 * Handles must be live; `patch` holds 31*31 bytes.
 */
int32_t csnn_classifier_predict(const CsnnClassifier *classifier,
                                const CsnnNetwork *net,
                                const uint8_t *patch);

/**
 * # Safety
 * `classifier` must be a live handle; `path` a NUL-terminated UTF-8 string.
 */
CsnnStatus csnn_classifier_save(const CsnnClassifier *classifier, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be valid.
 */
CsnnStatus csnn_classifier_load(const char *path, CsnnClassifier **out);

/**
 * # Safety
 * `classifier` must be null or a handle produced by this library, not yet
 * freed.
 */
void csnn_classifier_free(CsnnClassifier *classifier);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSNN_H */
