#ifndef TEMPOLEARN_H
#define TEMPOLEARN_H

#pragma once

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define TL_OK 0

#define TL_ERR_NULL 1

#define TL_ERR_INVALID 2

#define TL_ERR_DIMENSION 3

#define TL_ERR_NON_FINITE 4

#define TL_ERR_IO 5

#define TL_ERR_UNKNOWN_PRESET 6

#define TL_ERR_CONFIG 7

#define TL_ERR_PANIC 8

/**
 * Returned by `tl_run_preset` when the preset ran but an expectation failed.
 */
#define TL_CHECKS_FAILED 9

#define TL_GATING_NONE 0

#define TL_GATING_LABEL_RESET 1

/**
 * A classifier with its optimizer and gating state.
 */
typedef struct TlModel TlModel;

/**
 * Creates a `(input, hidden, classes)` classifier with uniform leak
 * `alpha`, trained by RMSprop at `learning_rate`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
int32_t tl_model_new(size_t input_dim,
                     size_t hidden_dim,
                     size_t num_classes,
                     double alpha,
                     int32_t gating,
                     double learning_rate,
                     uint64_t seed,
                     struct TlModel **out);

/**
 * # Safety
 * `model` must come from `tl_model_new` and not be used afterwards.
 */
void tl_model_free(struct TlModel *model);

/**
 * One incremental training step on `(input, label)`; writes the sample's
 * loss to `loss_out` when it is non-null.
 *
 * # Safety
 * `model` must be a live handle and `input` must point to `len` doubles.
 */
int32_t tl_model_train_step(struct TlModel *model,
                            const double *input,
                            size_t len,
                            size_t label,
                            double *loss_out);

/**
 * Stateless class probabilities for `input` into `out` (`out_len` must be
 * the class count).
 *
 * # Safety
 * `model` must be a live handle; `input` and `out` must point to `len`
 * and `out_len` doubles.
 */
int32_t tl_model_predict(const struct TlModel *model,
                         const double *input,
                         size_t len,
                         double *out,
                         size_t out_len);

/**
 * Clears the hidden state and gating history, as at an epoch start.
 *
 * # Safety
 * `model` must be a live handle.
 */
int32_t tl_model_reset_hidden(struct TlModel *model);

/**
 * Runs preset `id` at desk scale, writing CSVs into `out_dir`. Returns
 * `TL_CHECKS_FAILED` when it ran but an expectation did not hold.
 *
 * # Safety
 * `id` and `out_dir` must be NUL-terminated strings.
 */
int32_t tl_run_preset(const char *id, uint64_t seed, const char *out_dir, size_t runs);

/**
 * Copies the last error message (NUL-terminated, truncated to fit) into
 * `buf` and returns its full length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null with `len` 0.
 */
size_t tl_last_error_message(char *buf, size_t len);

#endif  /* TEMPOLEARN_H */
