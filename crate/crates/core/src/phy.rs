//! Channel and waveform layer: BPSK spreading, block Rayleigh fading with
//! path loss, asynchronous superposition of transmitted frames, AWGN, and
//! soft despreading.
//!
//! Everything here is real-valued baseband. Fading enters as a nonnegative
//! amplitude applied to unit-power antipodal chips; phase is assumed
//! perfectly compensated by the receiver.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Fixed bit-to-symbol mapping: 0 maps to -1, 1 maps to +1.
#[inline]
pub fn bit_to_symbol(bit: u8) -> f64 {
    if bit & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Antipodal spreading sequence of length `V` (the spreading factor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpreadingSequence {
    chips: Vec<i8>,
}

impl SpreadingSequence {
    /// Builds a sequence from raw chips. Every chip must be -1 or +1.
    pub fn new(chips: Vec<i8>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::InvalidInput(
                "spreading sequence must have length >= 1".into(),
            ));
        }
        if chips.iter().any(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidInput(
                "spreading sequence chips must be -1 or +1".into(),
            ));
        }
        Ok(Self { chips })
    }

    /// Draws a pseudorandom antipodal sequence of the given length.
    pub fn random<R: Rng>(spreading_factor: usize, rng: &mut R) -> Result<Self> {
        if spreading_factor == 0 {
            return Err(Error::InvalidInput(
                "spreading factor must be >= 1".into(),
            ));
        }
        let chips = (0..spreading_factor)
            .map(|_| if rng.next_u32() & 1 == 1 { 1i8 } else { -1i8 })
            .collect();
        Ok(Self { chips })
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    /// Chip value as a symbol (+1.0 / -1.0).
    #[inline]
    pub fn chip(&self, idx: usize) -> f64 {
        f64::from(self.chips[idx])
    }
}

/// Block-fading state of one link: channel power gain (fading times path
/// loss), transmit power, and the link distance the gain was drawn for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    gain: f64,
    tx_power: f64,
    distance_m: f64,
}

impl LinkState {
    /// Builds a link state from an explicit fading power, so tests and
    /// deterministic channels can pin the gain.
    pub fn from_parts(
        fading_power: f64,
        distance_m: f64,
        alpha: f64,
        tx_power: f64,
    ) -> Result<Self> {
        if distance_m.is_nan() || distance_m <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "distance must be positive, got {distance_m}"
            )));
        }
        if fading_power.is_nan() || fading_power < 0.0 || tx_power.is_nan() || tx_power < 0.0 {
            return Err(Error::InvalidInput(
                "fading power and tx power must be nonnegative".into(),
            ));
        }
        Ok(Self {
            gain: fading_power * distance_m.powf(-alpha),
            tx_power,
            distance_m,
        })
    }

    /// Channel power gain `H` including path loss.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }

    /// Received amplitude `sqrt(H * P)` applied to unit-power chips.
    #[inline]
    pub fn amplitude(&self) -> f64 {
        (self.gain * self.tx_power).sqrt()
    }
}

/// Draws a Rayleigh block-fading power: the squared magnitude of a
/// unit-variance complex Gaussian (exponential, mean 1).
pub fn draw_fading_power<R: Rng>(rng: &mut R) -> f64 {
    let component = Normal::new(0.0, (0.5f64).sqrt()).expect("valid normal");
    let re: f64 = component.sample(rng);
    let im: f64 = component.sample(rng);
    re * re + im * im
}

/// Draws one block-fading link state: a fresh fading power scaled by the
/// path loss `distance^-alpha`. Transmit power defaults to 1.
pub fn draw_link<R: Rng>(distance_m: f64, alpha: f64, rng: &mut R) -> Result<LinkState> {
    if distance_m.is_nan() || distance_m <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    LinkState::from_parts(draw_fading_power(rng), distance_m, alpha, 1.0)
}

/// Chip-rate real baseband signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChipSignal {
    samples: Vec<f64>,
}

impl ChipSignal {
    pub fn new(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Per-bit real despreader outputs; sign is the hard decision, magnitude the
/// confidence value.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBitVector {
    values: Vec<f64>,
}

impl SoftBitVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// The soft values of the first `n` bits, as a new vector.
    pub fn prefix(&self, n: usize) -> SoftBitVector {
        SoftBitVector::new(self.values[..n.min(self.values.len())].to_vec())
    }
}

/// Additive white Gaussian noise with the given variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    /// A noise model with strictly positive variance.
    pub fn new(variance: f64) -> Result<Self> {
        if variance.is_nan() || variance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise variance must be positive, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    /// The zero-variance limit, used by ideal-channel tests and the
    /// noiseless harness override.
    pub fn noiseless() -> Self {
        Self { variance: 0.0 }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// One frame entering the channel: a chip signal, its whole-chip delay, and
/// the link it propagates over.
#[derive(Debug, Clone)]
pub struct TxFrame {
    pub signal: ChipSignal,
    pub delay_chips: usize,
    pub link: LinkState,
}

/// Spreads a bit vector: bit `i` becomes `V` chips `d(i) * v(j)`.
pub fn spread(bits: &[u8], seq: &SpreadingSequence) -> Result<ChipSignal> {
    if bits.is_empty() {
        return Err(Error::InvalidInput("cannot spread an empty bit vector".into()));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidInput("bits must be 0 or 1".into()));
    }
    let v = seq.len();
    let mut samples = Vec::with_capacity(bits.len() * v);
    for &bit in bits {
        let d = bit_to_symbol(bit);
        for j in 0..v {
            samples.push(d * seq.chip(j));
        }
    }
    Ok(ChipSignal::new(samples))
}

/// Superposes delayed frames onto one received signal and adds AWGN:
/// sample `j` sums `sqrt(H_u P_u) * x_u(j - d_u)` over every frame whose
/// window covers `j`, plus Gaussian noise.
pub fn superpose<R: Rng>(
    frames: &[TxFrame],
    noise: NoiseModel,
    rng: &mut R,
) -> Result<ChipSignal> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("superpose needs at least one frame".into()));
    }
    let out_len = frames
        .iter()
        .map(|f| f.delay_chips + f.signal.len())
        .max()
        .unwrap_or(0);
    let mut samples = vec![0.0f64; out_len];
    for frame in frames {
        let amp = frame.link.amplitude();
        let base = frame.delay_chips;
        for (k, &x) in frame.signal.samples().iter().enumerate() {
            samples[base + k] += amp * x;
        }
    }
    if noise.variance() > 0.0 {
        let dist = Normal::new(0.0, noise.variance().sqrt()).expect("valid normal");
        for s in samples.iter_mut() {
            *s += dist.sample(rng);
        }
    }
    Ok(ChipSignal::new(samples))
}

/// Matched-filter despreading: soft bit `i` is the normalized correlation
/// `(1/V) * sum_j v(j) y(j)` over the `V` chips of bit `i`. The output is
/// left unclamped; its magnitude is the confidence value.
pub fn despread_soft(
    received: &ChipSignal,
    seq: &SpreadingSequence,
    num_bits: usize,
) -> Result<SoftBitVector> {
    let v = seq.len();
    if received.len() != num_bits * v {
        return Err(Error::InvalidInput(format!(
            "received length {} does not equal {} bits x {} chips",
            received.len(),
            num_bits,
            v
        )));
    }
    let samples = received.samples();
    let mut values = Vec::with_capacity(num_bits);
    for i in 0..num_bits {
        let window = &samples[i * v..(i + 1) * v];
        let sum: f64 = window
            .iter()
            .enumerate()
            .map(|(j, &y)| seq.chip(j) * y)
            .sum();
        values.push(sum / v as f64);
    }
    Ok(SoftBitVector::new(values))
}

/// Sign slicer: bit `i` is 1 when the soft value is >= 0 (a tie at exactly
/// zero decides 1), else 0.
pub fn hard_decide(soft: &SoftBitVector) -> Vec<u8> {
    soft.values()
        .iter()
        .map(|&c| if c >= 0.0 { 1u8 } else { 0u8 })
        .collect()
}
