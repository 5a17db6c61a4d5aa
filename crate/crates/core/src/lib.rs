//! Link-level simulator and library for relay-assisted partial packet
//! recovery in a CDMA uplink.
//!
//! A round runs in three time slots: sources transmit simultaneously over
//! CDMA; the destination CRC-checks each packet and, on failure, thresholds
//! the despreader's soft bits to find the unreliable positions and
//! broadcasts a minimum-cost retransmission request; the best relay for
//! each failed packet answers with just the requested bits, all relays
//! sharing the channel through IDMA with asynchronous chip delays, and the
//! destination separates them with an iterative chip-by-chip multiuser
//! detector and patches the failed packets. A Monte Carlo harness sweeps
//! SNR, relay distance, and retry budget, and reports throughput for this
//! scheme against traditional entire-packet ARQ.
//!
//! Modules follow the pipeline: [`phy`] (spreading, fading, superposition,
//! despreading), [`detect`] (unreliable-bit detection), [`feedback`]
//! (request construction and wire format), [`idma`] (interleaving and
//! multiuser detection), [`protocol`] (the ARQ state machine), and
//! [`harness`] (experiments, metrics, CSV, calibration).

pub mod detect;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod idma;
pub mod phy;
pub mod protocol;

pub use error::{Error, Result};
