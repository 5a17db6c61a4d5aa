//! C ABI over the partial-packet-recovery primitives that other stacks
//! bind: retransmission-request construction, the bit-exact feedback wire
//! format, confidence-threshold detection, and the packet CRC.
//!
//! Conventions: requests are opaque handles freed with
//! [`ppr_request_free`]; bit buffers hold one bit per byte (0 or 1); bit
//! positions are 1-based; every fallible call returns a [`PprStatus`] and
//! writes results through out-pointers.

use std::ptr;

use relay_ppr::detect::{detect_unreliable, UnreliableSet};
use relay_ppr::error::Error;
use relay_ppr::feedback::{build_request, decode_request, encode_request, BlockRequest};
use relay_ppr::phy::SoftBitVector;
use relay_ppr::protocol::{crc16_ccitt_false, crc_check, Packet};

/// Call outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PprStatus {
    /// Success.
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument violated a precondition.
    InvalidInput = 2,
    /// The bitstring is not a valid encoded request.
    MalformedRequest = 3,
    /// The request does not fit the wire format's fixed-width fields.
    EncodingOverflow = 4,
    /// The caller's buffer is too small; nothing was written.
    BufferTooSmall = 5,
    /// Any other library error.
    InternalError = 6,
}

fn status_of(err: &Error) -> PprStatus {
    match err {
        Error::InvalidInput(_) | Error::Config(_) => PprStatus::InvalidInput,
        Error::MalformedRequest(_) => PprStatus::MalformedRequest,
        Error::EncodingOverflow(_) => PprStatus::EncodingOverflow,
        _ => PprStatus::InternalError,
    }
}

/// Opaque retransmission request handle.
pub struct PprRequest {
    inner: BlockRequest,
}

fn boxed(out: *mut *mut PprRequest, req: BlockRequest) -> PprStatus {
    let handle = Box::new(PprRequest { inner: req });
    unsafe {
        *out = Box::into_raw(handle);
    }
    PprStatus::Ok
}

/// Builds the minimum-cost request covering the given strictly increasing
/// 1-based unreliable bit positions of a `packet_len`-bit packet.
///
/// # Safety
/// `indices` must point to `num_indices` readable `u32`s (may be null only
/// when `num_indices` is 0) and `out_request` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_build(
    indices: *const u32,
    num_indices: usize,
    packet_len: u32,
    out_request: *mut *mut PprRequest,
) -> PprStatus {
    if out_request.is_null() || (indices.is_null() && num_indices > 0) {
        return PprStatus::NullPointer;
    }
    let slice = if num_indices == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(indices, num_indices)
    };
    let positions: Vec<usize> = slice.iter().map(|&i| i as usize).collect();
    let set = match UnreliableSet::new(positions, packet_len as usize) {
        Ok(set) => set,
        Err(e) => return status_of(&e),
    };
    match build_request(&set, packet_len as usize) {
        Ok(req) => boxed(out_request, req),
        Err(e) => status_of(&e),
    }
}

/// Decodes a feedback bitstring (one bit per byte) produced by
/// [`ppr_request_encode`] with the same packet length.
///
/// # Safety
/// `bits` must point to `num_bits` readable bytes and `out_request` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_decode(
    bits: *const u8,
    num_bits: usize,
    packet_len: u32,
    out_request: *mut *mut PprRequest,
) -> PprStatus {
    if out_request.is_null() || (bits.is_null() && num_bits > 0) {
        return PprStatus::NullPointer;
    }
    let slice = if num_bits == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(bits, num_bits)
    };
    match decode_request(slice, packet_len as usize) {
        Ok(req) => boxed(out_request, req),
        Err(e) => status_of(&e),
    }
}

/// Releases a request handle. Null is ignored.
///
/// # Safety
/// `request` must be null or a pointer obtained from this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_free(request: *mut PprRequest) {
    if !request.is_null() {
        drop(Box::from_raw(request));
    }
}

/// Number of blocks in the request; 0 for null.
///
/// # Safety
/// `request` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_num_blocks(request: *const PprRequest) -> usize {
    request.as_ref().map_or(0, |r| r.inner.blocks().len())
}

/// Packet length the request addresses; 0 for null.
///
/// # Safety
/// `request` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_packet_len(request: *const PprRequest) -> u32 {
    request.as_ref().map_or(0, |r| r.inner.packet_len() as u32)
}

/// Reads one block's 1-based start and length.
///
/// # Safety
/// `request` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_block(
    request: *const PprRequest,
    index: usize,
    out_start: *mut u32,
    out_length: *mut u32,
) -> PprStatus {
    let Some(handle) = request.as_ref() else {
        return PprStatus::NullPointer;
    };
    if out_start.is_null() || out_length.is_null() {
        return PprStatus::NullPointer;
    }
    let Some(block) = handle.inner.blocks().get(index) else {
        return PprStatus::InvalidInput;
    };
    *out_start = block.start() as u32;
    *out_length = block.length() as u32;
    PprStatus::Ok
}

/// Accounted feedback cost in bits: per block, two index fields plus the
/// covered positions.
///
/// # Safety
/// `request` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_cost_bits(request: *const PprRequest) -> u64 {
    request.as_ref().map_or(0, |r| r.inner.total_cost_bits())
}

/// Bits the request asks to retransmit.
///
/// # Safety
/// `request` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_payload_bits(request: *const PprRequest) -> u64 {
    request.as_ref().map_or(0, |r| r.inner.payload_bits())
}

/// Length in bits of the encoded wire form.
///
/// # Safety
/// `request` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_encoded_len(request: *const PprRequest) -> usize {
    request.as_ref().map_or(0, |r| {
        let width = relay_ppr::feedback::index_field_width(r.inner.packet_len()) as usize;
        width + 2 * width * r.inner.blocks().len()
    })
}

/// Encodes the request into the caller's buffer, one bit per byte.
///
/// # Safety
/// `request` must be a live handle; `out_bits` must point to `capacity`
/// writable bytes; `out_written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ppr_request_encode(
    request: *const PprRequest,
    out_bits: *mut u8,
    capacity: usize,
    out_written: *mut usize,
) -> PprStatus {
    let Some(handle) = request.as_ref() else {
        return PprStatus::NullPointer;
    };
    if out_bits.is_null() || out_written.is_null() {
        return PprStatus::NullPointer;
    }
    let bits = match encode_request(&handle.inner) {
        Ok(bits) => bits,
        Err(e) => return status_of(&e),
    };
    if bits.len() > capacity {
        *out_written = bits.len();
        return PprStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bits.as_ptr(), out_bits, bits.len());
    *out_written = bits.len();
    PprStatus::Ok
}

/// Thresholds soft bits: writes the strictly increasing 1-based positions
/// whose confidence `|c|` is at or below `threshold`.
///
/// # Safety
/// `soft` must point to `num_bits` readable doubles; `out_indices` must
/// point to `capacity` writable `u32`s; `out_written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ppr_detect_unreliable(
    soft: *const f64,
    num_bits: usize,
    threshold: f64,
    out_indices: *mut u32,
    capacity: usize,
    out_written: *mut usize,
) -> PprStatus {
    if (soft.is_null() && num_bits > 0) || out_written.is_null() {
        return PprStatus::NullPointer;
    }
    let values = if num_bits == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(soft, num_bits)
    };
    let set = match detect_unreliable(&SoftBitVector::new(values.to_vec()), threshold) {
        Ok(set) => set,
        Err(e) => return status_of(&e),
    };
    let indices = set.indices();
    if indices.len() > capacity {
        *out_written = indices.len();
        return PprStatus::BufferTooSmall;
    }
    if !indices.is_empty() {
        if out_indices.is_null() {
            return PprStatus::NullPointer;
        }
        for (k, &i) in indices.iter().enumerate() {
            *out_indices.add(k) = i as u32;
        }
    }
    *out_written = indices.len();
    PprStatus::Ok
}

/// CRC-16/CCITT-FALSE over a bit vector (one bit per byte, values 0/1).
///
/// # Safety
/// `bits` must point to `num_bits` readable bytes; `out_crc` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ppr_crc16(
    bits: *const u8,
    num_bits: usize,
    out_crc: *mut u16,
) -> PprStatus {
    if bits.is_null() || out_crc.is_null() {
        return PprStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(bits, num_bits);
    if slice.iter().any(|&b| b > 1) {
        return PprStatus::InvalidInput;
    }
    *out_crc = crc16_ccitt_false(slice);
    PprStatus::Ok
}

/// Checks a whole received packet (data bits followed by the 16 CRC bits).
///
/// # Safety
/// `bits` must point to `num_bits` readable bytes; `out_ok` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ppr_crc_check(
    bits: *const u8,
    num_bits: usize,
    out_ok: *mut bool,
) -> PprStatus {
    if bits.is_null() || out_ok.is_null() {
        return PprStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(bits, num_bits);
    match Packet::from_bits(slice) {
        Ok(packet) => {
            *out_ok = crc_check(&packet);
            PprStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}
