#ifndef RELAY_PPR_H
#define RELAY_PPR_H

/* This header is generated by cbindgen from relay-ppr-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome.
 */
typedef enum PprStatus {
  /**
   * Success.
   */
  PprStatus_Ok = 0,
  /**
   * A required pointer was null.
   */
  PprStatus_NullPointer = 1,
  /**
   * An argument violated a precondition.
   */
  PprStatus_InvalidInput = 2,
  /**
   * The bitstring is not a valid encoded request.
   */
  PprStatus_MalformedRequest = 3,
  /**
   * The request does not fit the wire format's fixed-width fields.
   */
  PprStatus_EncodingOverflow = 4,
  /**
   * The caller's buffer is too small; nothing was written.
   */
  PprStatus_BufferTooSmall = 5,
  /**
   * Any other library error.
   */
  PprStatus_InternalError = 6,
} PprStatus;

/**
 * Opaque retransmission request handle.
 */
typedef struct PprRequest PprRequest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the minimum-cost request covering the given strictly increasing
 * 1-based unreliable bit positions of a `packet_len`-bit packet.
 *
 * # Safety
 * `indices` must point to `num_indices` readable `u32`s (may be null only
 * when `num_indices` is 0) and `out_request` must be a valid pointer.
 */
enum PprStatus ppr_request_build(const uint32_t *indices,
                                 uintptr_t num_indices,
                                 uint32_t packet_len,
                                 struct PprRequest **out_request);

/**
 * Decodes a feedback bitstring (one bit per byte) produced by
 * [`ppr_request_encode`] with the same packet length.
 *
 * # Safety
 * `bits` must point to `num_bits` readable bytes and `out_request` must be
 * a valid pointer.
 */
enum PprStatus ppr_request_decode(const uint8_t *bits,
                                  uintptr_t num_bits,
                                  uint32_t packet_len,
                                  struct PprRequest **out_request);

/**
 * Releases a request handle. Null is ignored.
 *
 * # Safety
 * `request` must be null or a pointer obtained from this library that has
 * not been freed yet.
 */
void ppr_request_free(struct PprRequest *request);

/**
 * Number of blocks in the request; 0 for null.
 *
 * # Safety
 * `request` must be null or a live handle.
 */
uintptr_t ppr_request_num_blocks(const struct PprRequest *request);

/**
 * Packet length the request addresses; 0 for null.
 *
 * # Safety
 * `request` must be null or a live handle.
 */
uint32_t ppr_request_packet_len(const struct PprRequest *request);

/**
 * Reads one block's 1-based start and length.
 *
 * # Safety
 * `request` must be a live handle; out-pointers must be valid.
 */
enum PprStatus ppr_request_block(const struct PprRequest *request,
                                 uintptr_t index,
                                 uint32_t *out_start,
                                 uint32_t *out_length);

/**
 * Accounted feedback cost in bits: per block, two index fields plus the
 * covered positions.
 *
 * # Safety
 * `request` must be null or a live handle.
 */
uint64_t ppr_request_cost_bits(const struct PprRequest *request);

/**
 * Bits the request asks to retransmit.
 *
 * # Safety
 * `request` must be null or a live handle.
 */
uint64_t ppr_request_payload_bits(const struct PprRequest *request);

/**
 * Length in bits of the encoded wire form.
 *
 * # Safety
 * `request` must be null or a live handle.
 */
uintptr_t ppr_request_encoded_len(const struct PprRequest *request);

/**
 * Encodes the request into the caller's buffer, one bit per byte.
 *
 * # Safety
 * `request` must be a live handle; `out_bits` must point to `capacity`
 * writable bytes; `out_written` must be valid.
 */
enum PprStatus ppr_request_encode(const struct PprRequest *request,
                                  uint8_t *out_bits,
                                  uintptr_t capacity,
                                  uintptr_t *out_written);

/**
 * Thresholds soft bits: writes the strictly increasing 1-based positions
 * whose confidence `|c|` is at or below `threshold`.
 *
 * # Safety
 * `soft` must point to `num_bits` readable doubles; `out_indices` must
 * point to `capacity` writable `u32`s; `out_written` must be valid.
 */
enum PprStatus ppr_detect_unreliable(const double *soft,
                                     uintptr_t num_bits,
                                     double threshold,
                                     uint32_t *out_indices,
                                     uintptr_t capacity,
                                     uintptr_t *out_written);

/**
 * CRC-16/CCITT-FALSE over a bit vector (one bit per byte, values 0/1).
 *
 * # Safety
 * `bits` must point to `num_bits` readable bytes; `out_crc` must be valid.
 */
enum PprStatus ppr_crc16(const uint8_t *bits, uintptr_t num_bits, uint16_t *out_crc);

/**
 * Checks a whole received packet (data bits followed by the 16 CRC bits).
 *
 * # Safety
 * `bits` must point to `num_bits` readable bytes; `out_ok` must be valid.
 */
enum PprStatus ppr_crc_check(const uint8_t *bits, uintptr_t num_bits, bool *out_ok);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAY_PPR_H */
