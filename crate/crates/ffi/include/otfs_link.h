#ifndef OTFS_LINK_H
#define OTFS_LINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum OtfsStatus {
  OTFS_STATUS_OK = 0,
  OTFS_STATUS_NULL_POINTER = 1,
  OTFS_STATUS_INVALID_ARGUMENT = 2,
  OTFS_STATUS_DIMENSION_MISMATCH = 3,
  OTFS_STATUS_NUMERICAL = 4,
  OTFS_STATUS_IO = 5,
  OTFS_STATUS_PANIC = 6,
} OtfsStatus;

// One channel realization together with its frame.
typedef struct OtfsChannel OtfsChannel;

// Frame geometry.
typedef struct OtfsFrame OtfsFrame;

// Layout-compatible with `double _Complex` and `std::complex<double>`.
typedef struct OtfsComplex {
  double re;
  double im;
} OtfsComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into this library.
const char *otfs_last_error_message(void);

// Create a frame. `*out` receives a handle to release with
// [`otfs_frame_free`].
//
// # Safety
// `out` must be valid for a pointer write.
enum OtfsStatus otfs_frame_new(size_t n_subcarriers,
                               size_t n_doppler_bins,
                               size_t max_delay_taps,
                               size_t cp_len,
                               double sample_rate,
                               struct OtfsFrame **out);

// # Safety
// `frame` must be NULL or a handle from [`otfs_frame_new`] not yet freed.
void otfs_frame_free(struct OtfsFrame *frame);

// Symbols per frame, `N_l * N_nu`; 0 for a NULL handle.
//
// # Safety
// `frame` must be NULL or a live frame handle.
size_t otfs_frame_len(const struct OtfsFrame *frame);

// Transmitted samples per frame including every cyclic prefix.
//
// # Safety
// `frame` must be NULL or a live frame handle.
size_t otfs_frame_len_with_cp(const struct OtfsFrame *frame);

// QPSK bits carried by one frame.
//
// # Safety
// `frame` must be NULL or a live frame handle.
size_t otfs_frame_bits(const struct OtfsFrame *frame);

// Gray-mapped unit-energy QPSK: `bits` (0/1 bytes, `otfs_frame_bits` of
// them) to `otfs_frame_len` delay-Doppler symbols.
//
// # Safety
// Pointers must be valid for their stated lengths.
enum OtfsStatus otfs_qpsk_map(const struct OtfsFrame *frame,
                              const uint8_t *bits,
                              size_t n_bits,
                              struct OtfsComplex *symbols,
                              size_t n_symbols);

// Hard QPSK decisions: `n_symbols` symbols to `2 * n_symbols` bits.
//
// # Safety
// Pointers must be valid for their stated lengths.
enum OtfsStatus otfs_qpsk_slice(const struct OtfsComplex *symbols,
                                size_t n_symbols,
                                uint8_t *bits,
                                size_t n_bits);

// Delay-Doppler grid to the CP-extended time signal.
//
// # Safety
// Pointers must be valid for their stated lengths.
enum OtfsStatus otfs_modulate(const struct OtfsFrame *frame,
                              const struct OtfsComplex *dd,
                              size_t n_dd,
                              struct OtfsComplex *tx,
                              size_t n_tx);

// CP-extended received signal to the delay-Doppler grid.
//
// # Safety
// Pointers must be valid for their stated lengths.
enum OtfsStatus otfs_demodulate(const struct OtfsFrame *frame,
                                const struct OtfsComplex *rx,
                                size_t n_rx,
                                struct OtfsComplex *dd,
                                size_t n_dd);

// Draw a fading channel: taps at sample delays `delays` with powers
// `powers_db` (normalized to unit total), maximum Doppler `doppler_hz`.
//
// # Safety
// `delays` and `powers_db` must hold `n_taps` values; `out` must be valid
// for a pointer write.
enum OtfsStatus otfs_channel_generate(const struct OtfsFrame *frame,
                                      const size_t *delays,
                                      const double *powers_db,
                                      size_t n_taps,
                                      double doppler_hz,
                                      uint64_t seed,
                                      struct OtfsChannel **out);

// # Safety
// `channel` must be NULL or a handle from [`otfs_channel_generate`] not
// yet freed.
void otfs_channel_free(struct OtfsChannel *channel);

// Pass a CP-extended signal through the channel and add noise at
// `snr_db` (`INFINITY` for none).
//
// # Safety
// Pointers must be valid for their stated lengths.
enum OtfsStatus otfs_channel_apply(const struct OtfsChannel *channel,
                                   const struct OtfsComplex *tx,
                                   size_t n_tx,
                                   double snr_db,
                                   uint64_t seed,
                                   struct OtfsComplex *rx,
                                   size_t n_rx);

// The delay-Doppler equivalent channel, `N x N` column-major with
// `N = otfs_frame_len`.
//
// # Safety
// `h_eq` must be valid for `n` writes.
enum OtfsStatus otfs_channel_equivalent(const struct OtfsChannel *channel,
                                        struct OtfsComplex *h_eq,
                                        size_t n);

// Run a sweep described by a JSON experiment config and return the BER
// table as CSV text in `*csv_out`, released with [`otfs_string_free`].
//
// # Safety
// `config_json` must be a NUL-terminated string; `csv_out` must be valid
// for a pointer write.
enum OtfsStatus otfs_run_experiment_json(const char *config_json, char **csv_out);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void otfs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTFS_LINK_H */
