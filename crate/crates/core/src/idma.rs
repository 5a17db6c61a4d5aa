//! IDMA transmit chain (spread, then chip-interleave) and the asynchronous
//! iterative chip-by-chip multiuser detector that separates several
//! variable-length partial packets out of one composite signal.
//!
//! The detector alternates an elementary signal estimator, which treats the
//! sum of the other users and noise as Gaussian interference and emits
//! per-chip LLRs, with a despreader that aggregates chip LLRs into bit LLRs
//! and feeds extrinsic chip information back as the next iteration's prior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::phy::{hard_decide, spread, ChipSignal, LinkState, SoftBitVector, SpreadingSequence};

/// Stand-in for an infinite LLR in the zero-variance (noiseless) limit;
/// large enough that `tanh(x/2)` saturates to exactly +-1, small enough
/// that sums over a spreading window stay finite.
const LLR_SATURATION: f64 = 1e12;

/// A seeded bijection on chip positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    forward: Vec<usize>,
    seed: u64,
}

impl Interleaver {
    /// The identity permutation.
    pub fn identity(len: usize) -> Self {
        Self {
            forward: (0..len).collect(),
            seed: 0,
        }
    }

    /// A pseudorandom permutation reproducible from its seed; transmitter
    /// and receiver derive the same interleaver from a shared seed.
    pub fn from_seed(len: usize, seed: u64) -> Self {
        let mut forward: Vec<usize> = (0..len).collect();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        // Fisher-Yates.
        for i in (1..len).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            forward.swap(i, j);
        }
        Self { forward, seed }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Interleaves: output position `k` takes input position `forward[k]`.
    pub fn permute(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if xs.len() != self.forward.len() {
            return Err(Error::InvalidInput(format!(
                "permutation length {} does not match input length {}",
                self.forward.len(),
                xs.len()
            )));
        }
        Ok(self.forward.iter().map(|&i| xs[i]).collect())
    }

    /// Inverts [`Interleaver::permute`].
    pub fn inverse_permute(&self, xs: &[f64]) -> Result<Vec<f64>> {
        if xs.len() != self.forward.len() {
            return Err(Error::InvalidInput(format!(
                "permutation length {} does not match input length {}",
                self.forward.len(),
                xs.len()
            )));
        }
        let mut out = vec![0.0; xs.len()];
        for (k, &i) in self.forward.iter().enumerate() {
            out[i] = xs[k];
        }
        Ok(out)
    }
}

/// One relay's partial-packet transmission: its chip stream, chip delay,
/// link state, and the spreading/interleaving parameters the receiver
/// shares by convention.
#[derive(Debug, Clone)]
pub struct IdmaFrame {
    pub relay_id: usize,
    /// Number of payload bits `I(u)` carried by this frame.
    pub payload_bits: usize,
    pub chips: ChipSignal,
    pub delay_chips: usize,
    pub link: LinkState,
    pub sequence: SpreadingSequence,
    pub interleaver: Interleaver,
}

impl IdmaFrame {
    pub fn new(
        relay_id: usize,
        payload_bits: usize,
        chips: ChipSignal,
        delay_chips: usize,
        link: LinkState,
        sequence: SpreadingSequence,
        interleaver: Interleaver,
    ) -> Result<Self> {
        let expect = payload_bits * sequence.len();
        if chips.len() != expect {
            return Err(Error::InvalidInput(format!(
                "frame carries {} chips but {} bits x {} chips were declared",
                chips.len(),
                payload_bits,
                sequence.len()
            )));
        }
        if interleaver.len() != expect {
            return Err(Error::InvalidInput(format!(
                "interleaver length {} does not match {} chips",
                interleaver.len(),
                expect
            )));
        }
        Ok(Self {
            relay_id,
            payload_bits,
            chips,
            delay_chips,
            link,
            sequence,
            interleaver,
        })
    }

    /// Spreads and interleaves `bits` into a ready-to-transmit frame.
    pub fn encode(
        relay_id: usize,
        bits: &[u8],
        sequence: SpreadingSequence,
        interleaver: Interleaver,
        delay_chips: usize,
        link: LinkState,
    ) -> Result<Self> {
        let chips = idma_encode(bits, &sequence, &interleaver)?;
        Self::new(
            relay_id,
            bits.len(),
            chips,
            delay_chips,
            link,
            sequence,
            interleaver,
        )
    }

    /// Chip count `N_u = I(u) * V`.
    pub fn chip_len(&self) -> usize {
        self.payload_bits * self.sequence.len()
    }
}

/// IDMA transmitter: spread the bits, then permute the chips.
pub fn idma_encode(
    bits: &[u8],
    sequence: &SpreadingSequence,
    interleaver: &Interleaver,
) -> Result<ChipSignal> {
    let spread_chips = spread(bits, sequence)?;
    if interleaver.len() != spread_chips.len() {
        return Err(Error::InvalidInput(format!(
            "interleaver length {} does not match {} chips",
            interleaver.len(),
            spread_chips.len()
        )));
    }
    Ok(ChipSignal::new(interleaver.permute(spread_chips.samples())?))
}

/// The detector's running belief about one relay's chips, in transmitted
/// (interleaved) chip order. Within the frame window `var = 1 - mean^2`;
/// chips outside any window contribute nothing to the composite statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayBelief {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RelayBelief {
    /// The uninformative prior: mean 0, variance 1.
    pub fn initial(chip_len: usize) -> Self {
        Self {
            mean: vec![0.0; chip_len],
            var: vec![1.0; chip_len],
        }
    }
}

/// Per-relay chip beliefs for one composite signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EseState {
    beliefs: Vec<RelayBelief>,
}

impl EseState {
    /// Initializes every relay to the uninformative prior.
    pub fn initial(frames: &[IdmaFrame]) -> Self {
        Self {
            beliefs: frames
                .iter()
                .map(|f| RelayBelief::initial(f.chip_len()))
                .collect(),
        }
    }

    pub fn from_beliefs(beliefs: Vec<RelayBelief>) -> Self {
        Self { beliefs }
    }

    pub fn beliefs(&self) -> &[RelayBelief] {
        &self.beliefs
    }

    pub fn set_belief(&mut self, relay: usize, belief: RelayBelief) {
        self.beliefs[relay] = belief;
    }
}

/// One elementary-signal-estimation pass: for every relay and every chip in
/// its window, subtract the expected interference, normalize by its
/// variance, and emit the chip LLR
/// `2 sqrt(H P) (y(j) - E[eta]) / Var[eta]`.
///
/// Returns per-relay LLR vectors in transmitted chip order.
pub fn ese_step(
    received: &ChipSignal,
    frames: &[IdmaFrame],
    state: &EseState,
    sigma2: f64,
) -> Result<Vec<Vec<f64>>> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("ese_step needs at least one frame".into()));
    }
    if state.beliefs().len() != frames.len() {
        return Err(Error::InvalidInput(
            "state does not cover every frame".into(),
        ));
    }
    if !sigma2.is_finite() || sigma2 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    let span = frames
        .iter()
        .map(|f| f.delay_chips + f.chip_len())
        .max()
        .unwrap_or(0);
    if received.len() < span {
        return Err(Error::InvalidInput(format!(
            "received signal has {} chips but frames span {span}",
            received.len()
        )));
    }
    for (f, b) in frames.iter().zip(state.beliefs()) {
        if b.mean.len() != f.chip_len() || b.var.len() != f.chip_len() {
            return Err(Error::InvalidInput(
                "belief length does not match frame chip count".into(),
            ));
        }
    }

    let y = received.samples();
    // Composite mean and variance, chips outside every window contributing
    // zero.
    let mut mean_y = vec![0.0f64; y.len()];
    let mut var_y = vec![sigma2; y.len()];
    for (f, b) in frames.iter().zip(state.beliefs()) {
        let a = f.link.amplitude();
        for k in 0..f.chip_len() {
            let j = f.delay_chips + k;
            mean_y[j] += a * b.mean[k];
            var_y[j] += a * a * b.var[k];
        }
    }

    let mut out = Vec::with_capacity(frames.len());
    for (f, b) in frames.iter().zip(state.beliefs()) {
        let a = f.link.amplitude();
        let mut llrs = Vec::with_capacity(f.chip_len());
        for k in 0..f.chip_len() {
            let j = f.delay_chips + k;
            let mean_eta = mean_y[j] - a * b.mean[k];
            let var_eta = var_y[j] - a * a * b.var[k];
            if var_eta < 0.0 {
                return Err(Error::NumericalDegeneracy(format!(
                    "interference variance {var_eta} at chip {j}"
                )));
            }
            let num = 2.0 * a * (y[j] - mean_eta);
            let llr = if var_eta > 0.0 {
                num / var_eta
            } else if num > 0.0 {
                LLR_SATURATION
            } else if num < 0.0 {
                -LLR_SATURATION
            } else {
                0.0
            };
            llrs.push(llr);
        }
        out.push(llrs);
    }
    Ok(out)
}

/// Despreader half of one iteration: deinterleave the chip LLRs, sum each
/// bit's window into a bit LLR, and feed back leave-one-out extrinsic chip
/// priors, re-interleaved to transmitted order.
pub fn despread_combine(
    chip_llrs: &[f64],
    sequence: &SpreadingSequence,
    interleaver: &Interleaver,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = sequence.len();
    if chip_llrs.len() != interleaver.len() || !chip_llrs.len().is_multiple_of(v) {
        return Err(Error::InvalidInput(format!(
            "chip LLR length {} does not match interleaver {} / spreading factor {v}",
            chip_llrs.len(),
            interleaver.len()
        )));
    }
    let lambda = interleaver.inverse_permute(chip_llrs)?;
    let num_bits = lambda.len() / v;
    let mut bit_llrs = Vec::with_capacity(num_bits);
    let mut extrinsic = vec![0.0f64; lambda.len()];
    for i in 0..num_bits {
        let window = &lambda[i * v..(i + 1) * v];
        let total: f64 = window
            .iter()
            .enumerate()
            .map(|(j, &l)| sequence.chip(j) * l)
            .sum();
        bit_llrs.push(total);
        for (j, &l) in window.iter().enumerate() {
            let vj = sequence.chip(j);
            extrinsic[i * v + j] = vj * (total - vj * l);
        }
    }
    let i_mud = interleaver.permute(&extrinsic)?;
    Ok((bit_llrs, i_mud))
}

/// Belief update from the despreader's a-priori information:
/// `mean = tanh(I_MUD / 2)` and `var = 1 - mean^2` inside the window.
pub fn update_state(i_mud: &[f64], frame: &IdmaFrame) -> Result<RelayBelief> {
    if i_mud.len() != frame.chip_len() {
        return Err(Error::InvalidInput(format!(
            "a-priori length {} does not match frame chip count {}",
            i_mud.len(),
            frame.chip_len()
        )));
    }
    let mean: Vec<f64> = i_mud.iter().map(|&x| (x / 2.0).tanh()).collect();
    let var = mean.iter().map(|&m| 1.0 - m * m).collect();
    Ok(RelayBelief { mean, var })
}

/// Result of running the iterative detector.
#[derive(Debug, Clone)]
pub struct MudOutput {
    /// Hard decisions per relay, in payload-bit order.
    pub decisions: Vec<Vec<u8>>,
    /// Final bit LLRs per relay.
    pub bit_llrs: Vec<Vec<f64>>,
}

/// Runs the full iterative chip-by-chip detector: initialize uninformative
/// beliefs, then repeat estimate / despread / update for the given number
/// of iterations and slice the final bit LLRs.
pub fn mud_detect(
    received: &ChipSignal,
    frames: &[IdmaFrame],
    sigma2: f64,
    iterations: usize,
) -> Result<MudOutput> {
    if iterations == 0 {
        return Err(Error::InvalidInput("iteration count must be >= 1".into()));
    }
    let mut state = EseState::initial(frames);
    let mut bit_llrs: Vec<Vec<f64>> = vec![Vec::new(); frames.len()];
    for _ in 0..iterations {
        let chip_llrs = ese_step(received, frames, &state, sigma2)?;
        for (u, frame) in frames.iter().enumerate() {
            let (bits, i_mud) =
                despread_combine(&chip_llrs[u], &frame.sequence, &frame.interleaver)?;
            state.set_belief(u, update_state(&i_mud, frame)?);
            bit_llrs[u] = bits;
        }
    }
    let decisions = bit_llrs
        .iter()
        .map(|llrs| hard_decide(&SoftBitVector::new(llrs.clone())))
        .collect();
    Ok(MudOutput {
        decisions,
        bit_llrs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{superpose, NoiseModel, TxFrame};
    use rand::RngExt;

    fn unit_link() -> LinkState {
        LinkState::from_parts(1.0, 1.0, 4.0, 1.0).unwrap()
    }

    fn random_bits<R: Rng>(n: usize, rng: &mut R) -> Vec<u8> {
        (0..n).map(|_| (rng.next_u32() & 1) as u8).collect()
    }

    fn frame_from_bits(
        relay_id: usize,
        bits: &[u8],
        v: usize,
        seed: u64,
        delay: usize,
        link: LinkState,
        rng: &mut ChaCha12Rng,
    ) -> IdmaFrame {
        let seq = SpreadingSequence::random(v, rng).unwrap();
        let il = Interleaver::from_seed(bits.len() * v, seed);
        IdmaFrame::encode(relay_id, bits, seq, il, delay, link).unwrap()
    }

    #[test]
    fn identity_interleaver_is_plain_spreading() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let seq = SpreadingSequence::random(4, &mut rng).unwrap();
        let bits = random_bits(8, &mut rng);
        let il = Interleaver::identity(32);
        let a = idma_encode(&bits, &seq, &il).unwrap();
        let b = spread(&bits, &seq).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deinterleaving_recovers_the_spread_signal() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for trial in 0..10 {
            let seq = SpreadingSequence::random(8, &mut rng).unwrap();
            let bits = random_bits(12, &mut rng);
            let il = Interleaver::from_seed(96, 1000 + trial);
            let tx = idma_encode(&bits, &seq, &il).unwrap();
            let back = il.inverse_permute(tx.samples()).unwrap();
            assert_eq!(back, spread(&bits, &seq).unwrap().samples());
        }
    }

    #[test]
    fn different_seeds_give_distinct_chip_orders() {
        // Random-permutation collision oracle: two interleavers over the
        // same spread signal should disagree in at least 40% of positions
        // once the frame is 64+ chips.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let v = 8;
        let bits = random_bits(16, &mut rng);
        let seq = SpreadingSequence::random(v, &mut rng).unwrap();
        let n = bits.len() * v;
        let a = idma_encode(&bits, &seq, &Interleaver::from_seed(n, 11)).unwrap();
        let b = idma_encode(&bits, &seq, &Interleaver::from_seed(n, 12)).unwrap();
        let differing = a
            .samples()
            .iter()
            .zip(b.samples())
            .filter(|(x, y)| x != y)
            .count();
        assert!(
            differing * 10 >= n * 4,
            "only {differing} of {n} chips differ"
        );
    }

    #[test]
    fn interleaver_rejects_length_mismatch() {
        let il = Interleaver::from_seed(8, 1);
        assert!(il.permute(&[0.0; 7]).is_err());
        let seq = SpreadingSequence::random(4, &mut ChaCha12Rng::seed_from_u64(0)).unwrap();
        assert!(idma_encode(&[1, 0], &seq, &Interleaver::identity(4)).is_err());
    }

    #[test]
    fn ese_with_uninformative_prior_scales_received_chips() {
        // Single relay, H = P = 1, sigma^2 = 1: the estimator collapses to
        // LLR(j) = 2 y(j).
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let bits = random_bits(4, &mut rng);
        let frame = frame_from_bits(0, &bits, 4, 7, 0, unit_link(), &mut rng);
        let y: Vec<f64> = (0..frame.chip_len())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        let state = EseState::initial(std::slice::from_ref(&frame));
        let llrs = ese_step(
            &ChipSignal::new(y.clone()),
            std::slice::from_ref(&frame),
            &state,
            1.0,
        )
        .unwrap();
        for (l, yj) in llrs[0].iter().zip(&y) {
            assert!((l - 2.0 * yj).abs() < 1e-12);
        }
    }

    #[test]
    fn ese_half_amplitude_chip_gives_unit_llr() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let bits = vec![1];
        let frame = frame_from_bits(0, &bits, 1, 0, 0, unit_link(), &mut rng);
        let state = EseState::initial(std::slice::from_ref(&frame));
        let llrs = ese_step(
            &ChipSignal::new(vec![0.5]),
            std::slice::from_ref(&frame),
            &state,
            1.0,
        )
        .unwrap();
        assert!((llrs[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolved_interferer_cancels_exactly() {
        // With relay 2's chips fully resolved (mean +-1, var 0), relay 1's
        // LLR equals the single-relay LLR applied to y minus relay 2's
        // reconstructed contribution.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let v = 4;
        let bits1 = random_bits(6, &mut rng);
        let bits2 = random_bits(6, &mut rng);
        let link1 = LinkState::from_parts(0.8, 1.0, 4.0, 1.0).unwrap();
        let link2 = LinkState::from_parts(1.3, 1.0, 4.0, 1.0).unwrap();
        let f1 = frame_from_bits(0, &bits1, v, 21, 0, link1, &mut rng);
        let f2 = frame_from_bits(1, &bits2, v, 22, 0, link2, &mut rng);
        let sigma2 = 0.3;
        let y = superpose(
            &[
                TxFrame {
                    signal: f1.chips.clone(),
                    delay_chips: 0,
                    link: link1,
                },
                TxFrame {
                    signal: f2.chips.clone(),
                    delay_chips: 0,
                    link: link2,
                },
            ],
            NoiseModel::new(sigma2).unwrap(),
            &mut rng,
        )
        .unwrap();

        let resolved = RelayBelief {
            mean: f2.chips.samples().to_vec(),
            var: vec![0.0; f2.chip_len()],
        };
        let state = EseState::from_beliefs(vec![
            RelayBelief::initial(f1.chip_len()),
            resolved,
        ]);
        let frames = vec![f1.clone(), f2.clone()];
        let llrs = ese_step(&y, &frames, &state, sigma2).unwrap();

        let a1 = link1.amplitude();
        let a2 = link2.amplitude();
        for (k, &l) in llrs[0].iter().enumerate() {
            let cleaned = y.samples()[k] - a2 * f2.chips.samples()[k];
            let expect = 2.0 * a1 * cleaned / sigma2;
            assert!((l - expect).abs() < 1e-9, "chip {k}: {l} vs {expect}");
        }
    }

    #[test]
    fn despread_combine_single_chip_has_no_extrinsic() {
        let seq = SpreadingSequence::new(vec![1]).unwrap();
        let il = Interleaver::identity(3);
        let (bits, ext) = despread_combine(&[0.5, -1.0, 2.0], &seq, &il).unwrap();
        assert_eq!(bits, vec![0.5, -1.0, 2.0]);
        assert_eq!(ext, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn despread_combine_leave_one_out() {
        let seq = SpreadingSequence::new(vec![1, 1]).unwrap();
        let il = Interleaver::identity(2);
        let (bits, ext) = despread_combine(&[1.0, 3.0], &seq, &il).unwrap();
        assert_eq!(bits, vec![4.0]);
        assert_eq!(ext, vec![3.0, 1.0]);
    }

    #[test]
    fn update_state_tanh_rule() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let frame = frame_from_bits(0, &[1, 0], 1, 0, 0, unit_link(), &mut rng);
        let b = update_state(&[0.0, 2.0], &frame).unwrap();
        assert_eq!(b.mean[0], 0.0);
        assert_eq!(b.var[0], 1.0);
        assert!((b.mean[1] - 0.761_594_155_955_764_9).abs() < 1e-12);
        assert!((b.var[1] - (1.0 - b.mean[1] * b.mean[1])).abs() < 1e-15);
        // Consistency: var = 1 - mean^2, mean within [-1, 1].
        for (m, v) in b.mean.iter().zip(&b.var) {
            assert!((-1.0..=1.0).contains(m));
            assert!((v - (1.0 - m * m)).abs() < 1e-15);
        }
    }

    #[test]
    fn chips_outside_a_window_carry_no_interference() {
        // Relay 2 delayed past relay 1's frame: relay 1's interference
        // variance is exactly sigma^2 everywhere in its own window.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let v = 2;
        let bits = random_bits(3, &mut rng);
        let f1 = frame_from_bits(0, &bits, v, 31, 0, unit_link(), &mut rng);
        let f2 = frame_from_bits(1, &bits, v, 32, f1.chip_len(), unit_link(), &mut rng);
        let sigma2 = 0.7;
        let y = ChipSignal::new(vec![0.25; f1.chip_len() + f2.chip_len()]);
        let state = EseState::initial(&[f1.clone(), f2.clone()]);
        let llrs = ese_step(&y, &[f1.clone(), f2], &state, sigma2).unwrap();
        let a = f1.link.amplitude();
        for &l in &llrs[0] {
            // Var(eta) = sigma^2 + (own var cancelled) => LLR = 2 a y / sigma^2.
            assert!((l - 2.0 * a * 0.25 / sigma2).abs() < 1e-12);
        }
    }

    #[test]
    fn single_relay_noiseless_decodes_in_one_iteration() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for delay in [0usize, 3, 17] {
            let bits = random_bits(16, &mut rng);
            let frame = frame_from_bits(0, &bits, 8, 41, delay, unit_link(), &mut rng);
            let y = superpose(
                &[TxFrame {
                    signal: frame.chips.clone(),
                    delay_chips: delay,
                    link: frame.link,
                }],
                NoiseModel::noiseless(),
                &mut rng,
            )
            .unwrap();
            let out = mud_detect(&y, std::slice::from_ref(&frame), 0.0, 1).unwrap();
            assert_eq!(out.decisions[0], bits);
        }
    }

    #[test]
    fn disjoint_windows_decode_regardless_of_iterations() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let v = 4;
        let bits1 = random_bits(8, &mut rng);
        let bits2 = random_bits(5, &mut rng);
        let f1 = frame_from_bits(0, &bits1, v, 51, 0, unit_link(), &mut rng);
        let f2 = frame_from_bits(1, &bits2, v, 52, f1.chip_len() + 2, unit_link(), &mut rng);
        let frames = vec![f1.clone(), f2.clone()];
        let y = superpose(
            &frames
                .iter()
                .map(|f| TxFrame {
                    signal: f.chips.clone(),
                    delay_chips: f.delay_chips,
                    link: f.link,
                })
                .collect::<Vec<_>>(),
            NoiseModel::noiseless(),
            &mut rng,
        )
        .unwrap();
        for iterations in [1, 4, 10] {
            let out = mud_detect(&y, &frames, 0.0, iterations).unwrap();
            assert_eq!(out.decisions[0], bits1);
            assert_eq!(out.decisions[1], bits2);
        }
    }

    #[test]
    fn overlapping_variable_length_frames_decode_noiselessly() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let v = 16;
        let bits1 = random_bits(48, &mut rng);
        let bits2 = random_bits(64, &mut rng);
        let f1 = frame_from_bits(0, &bits1, v, 61, 5, unit_link(), &mut rng);
        let f2 = frame_from_bits(1, &bits2, v, 62, 0, unit_link(), &mut rng);
        let frames = vec![f1, f2];
        let y = superpose(
            &frames
                .iter()
                .map(|f| TxFrame {
                    signal: f.chips.clone(),
                    delay_chips: f.delay_chips,
                    link: f.link,
                })
                .collect::<Vec<_>>(),
            NoiseModel::noiseless(),
            &mut rng,
        )
        .unwrap();
        let out = mud_detect(&y, &frames, 0.0, 10).unwrap();
        assert_eq!(out.decisions[0], bits1);
        assert_eq!(out.decisions[1], bits2);
    }

    #[test]
    fn single_user_matches_matched_filter_llr() {
        // One-iteration single-frame detection equals the analytic
        // matched-filter LLR 2 sqrt(HP) V c / sigma^2 computed through an
        // independent despreading path.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let v = 1 << rng.random_range(0..5u32) as usize;
            let n_bits = rng.random_range(1..40usize);
            let bits = random_bits(n_bits, &mut rng);
            let fading: f64 = rng.random_range(0.05..2.0);
            let power: f64 = rng.random_range(0.1..2.0);
            let link = LinkState::from_parts(fading, 1.0, 4.0, power).unwrap();
            let delay = rng.random_range(0..32usize);
            let frame = frame_from_bits(0, &bits, v, rng.next_u64(), delay, link, &mut rng);
            let sigma2 = rng.random_range(0.05..1.0);
            let y = superpose(
                &[TxFrame {
                    signal: frame.chips.clone(),
                    delay_chips: delay,
                    link,
                }],
                NoiseModel::new(sigma2).unwrap(),
                &mut rng,
            )
            .unwrap();

            let out = mud_detect(&y, std::slice::from_ref(&frame), sigma2, 1).unwrap();

            // Oracle: deinterleave the windowed signal, despread, scale.
            let window = &y.samples()[delay..delay + frame.chip_len()];
            let despread_in = frame.interleaver.inverse_permute(window).unwrap();
            let soft = crate::phy::despread_soft(
                &ChipSignal::new(despread_in),
                &frame.sequence,
                bits.len(),
            )
            .unwrap();
            let scale = 2.0 * link.amplitude() * v as f64 / sigma2;
            for (l, c) in out.bit_llrs[0].iter().zip(soft.values()) {
                let expect = scale * c;
                let tol = 1e-9 * expect.abs().max(1e-12);
                assert!((l - expect).abs() <= tol, "{l} vs {expect}");
            }
        }
    }

    #[test]
    fn iterations_reduce_two_user_bit_errors() {
        // Two overlapping equal-transmit-power users over flat Rayleigh
        // fading at 10 dB mean chip SNR: iterating the detector must
        // strictly reduce the error count over a few hundred composites.
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let v = 16;
        let n_bits = 64;
        let sigma2 = 0.1;
        let trials = 200;
        let mut errs_1 = 0usize;
        let mut errs_10 = 0usize;
        for _ in 0..trials {
            let bits1 = random_bits(n_bits, &mut rng);
            let bits2 = random_bits(n_bits, &mut rng);
            let d2 = rng.random_range(0..v);
            let link1 = crate::phy::draw_link(1.0, 4.0, &mut rng).unwrap();
            let link2 = crate::phy::draw_link(1.0, 4.0, &mut rng).unwrap();
            let f1 = frame_from_bits(0, &bits1, v, rng.next_u64(), 0, link1, &mut rng);
            let f2 = frame_from_bits(1, &bits2, v, rng.next_u64(), d2, link2, &mut rng);
            let frames = vec![f1, f2];
            let y = superpose(
                &frames
                    .iter()
                    .map(|f| TxFrame {
                        signal: f.chips.clone(),
                        delay_chips: f.delay_chips,
                        link: f.link,
                    })
                    .collect::<Vec<_>>(),
                NoiseModel::new(sigma2).unwrap(),
                &mut rng,
            )
            .unwrap();
            let one = mud_detect(&y, &frames, sigma2, 1).unwrap();
            let ten = mud_detect(&y, &frames, sigma2, 10).unwrap();
            for (dec, truth) in one.decisions.iter().zip([&bits1, &bits2]) {
                errs_1 += dec.iter().zip(truth.iter()).filter(|(a, b)| a != b).count();
            }
            for (dec, truth) in ten.decisions.iter().zip([&bits1, &bits2]) {
                errs_10 += dec.iter().zip(truth.iter()).filter(|(a, b)| a != b).count();
            }
        }
        assert!(
            errs_10 < errs_1,
            "iteration 10 errors {errs_10} not below iteration 1 errors {errs_1}"
        );
    }
}
