//! The three-time-slot ARQ state machine: simultaneous CDMA uplink, CRC
//! check and feedback decision at the destination, relay-assisted IDMA
//! partial retransmission (or full source retransmission), packet repair,
//! and truncated-retry accounting.

use rand::{Rng, RngExt};

use crate::detect::{detect_unreliable, genie_unreliable, UnreliableSet};
use crate::error::{Error, Result};
use crate::feedback::{build_request, decode_request, encode_request, BlockRequest};
use crate::idma::{mud_detect, IdmaFrame, Interleaver};
use crate::phy::{
    despread_soft, draw_fading_power, hard_decide, spread, superpose, ChipSignal, LinkState,
    NoiseModel, SoftBitVector, SpreadingSequence, TxFrame,
};

/// CRC field width appended to every packet.
pub const CRC_BITS: usize = 16;

/// CRC-16/CCITT-FALSE over a bit vector, most-significant bit first:
/// polynomial 0x1021, initial value 0xFFFF, no reflection, no final xor.
pub fn crc16_ccitt_false(bits: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bits {
        let top = (crc >> 15) & 1;
        crc <<= 1;
        if top ^ u16::from(b & 1) == 1 {
            crc ^= 0x1021;
        }
    }
    crc
}

/// Data bits plus their CRC; the unit the ARQ loop accepts or retries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    data_bits: Vec<u8>,
    crc_bits: Vec<u8>,
}

impl Packet {
    pub fn data_bits(&self) -> &[u8] {
        &self.data_bits
    }

    pub fn crc_bits(&self) -> &[u8] {
        &self.crc_bits
    }

    /// All over-the-air bits: data followed by CRC.
    pub fn bits(&self) -> Vec<u8> {
        let mut out = self.data_bits.clone();
        out.extend_from_slice(&self.crc_bits);
        out
    }

    /// Total over-the-air length.
    pub fn len(&self) -> usize {
        self.data_bits.len() + self.crc_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reassembles a packet from received bits (data and CRC fields as
    /// laid out by [`Packet::bits`]); does not validate the CRC.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() <= CRC_BITS {
            return Err(Error::InvalidInput(format!(
                "packet needs more than {CRC_BITS} bits, got {}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("bits must be 0 or 1".into()));
        }
        let split = bits.len() - CRC_BITS;
        Ok(Self {
            data_bits: bits[..split].to_vec(),
            crc_bits: bits[split..].to_vec(),
        })
    }
}

/// Appends the CRC to a data bit vector.
pub fn crc_append(data: &[u8]) -> Result<Packet> {
    if data.is_empty() {
        return Err(Error::InvalidInput("cannot checksum an empty packet".into()));
    }
    if data.iter().any(|&b| b > 1) {
        return Err(Error::InvalidInput("bits must be 0 or 1".into()));
    }
    let crc = crc16_ccitt_false(data);
    let crc_bits = (0..CRC_BITS)
        .map(|k| ((crc >> (CRC_BITS - 1 - k)) & 1) as u8)
        .collect();
    Ok(Packet {
        data_bits: data.to_vec(),
        crc_bits,
    })
}

/// Recomputes the CRC over the data field and compares.
pub fn crc_check(packet: &Packet) -> bool {
    let crc = crc16_ccitt_false(&packet.data_bits);
    packet
        .crc_bits
        .iter()
        .enumerate()
        .all(|(k, &b)| b == ((crc >> (CRC_BITS - 1 - k)) & 1) as u8)
}

/// Node population and geometry, reduced to the three link distances that
/// set the mean path gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSet {
    num_sources: usize,
    num_relays: usize,
    d_sd_m: f64,
    d_rd_m: f64,
    d_sr_m: f64,
}

impl NodeSet {
    pub fn new(
        num_sources: usize,
        num_relays: usize,
        d_sd_m: f64,
        d_rd_m: f64,
        d_sr_m: f64,
    ) -> Result<Self> {
        if num_sources < 1 {
            return Err(Error::Config("need at least one source".into()));
        }
        if num_relays < num_sources {
            return Err(Error::Config(format!(
                "need at least one relay per source: {num_relays} relays for {num_sources} sources"
            )));
        }
        let bad = |d: f64| d.is_nan() || d <= 0.0;
        if bad(d_sd_m) || bad(d_rd_m) || bad(d_sr_m) {
            return Err(Error::Config("distances must be positive".into()));
        }
        Ok(Self {
            num_sources,
            num_relays,
            d_sd_m,
            d_rd_m,
            d_sr_m,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    pub fn d_sd_m(&self) -> f64 {
        self.d_sd_m
    }

    pub fn d_rd_m(&self) -> f64 {
        self.d_rd_m
    }

    pub fn d_sr_m(&self) -> f64 {
        self.d_sr_m
    }
}

/// Which retransmission scheme a round runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Entire-packet retransmission from the source on every failure.
    TraditionalArq,
    /// Relay-assisted IDMA partial packet recovery.
    IdmaPpr,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::TraditionalArq => "traditional_arq",
            Scheme::IdmaPpr => "idma_ppr",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "traditional_arq" => Ok(Scheme::TraditionalArq),
            "idma_ppr" => Ok(Scheme::IdmaPpr),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected traditional_arq or idma_ppr)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unreliable-bit detection for a round, with the threshold already
/// resolved for the operating SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionKind {
    Genie,
    Threshold(f64),
}

/// Fading model for every link draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    /// Block Rayleigh fading: exponential power, one draw per link per
    /// round; a packet's retries see the same fade.
    Rayleigh,
    /// Unit gain (no fading); used by ideal-channel tests.
    Unit,
}

impl FadingModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FadingModel::Rayleigh => "rayleigh",
            FadingModel::Unit => "unit",
        }
    }
}

impl std::str::FromStr for FadingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rayleigh" => Ok(FadingModel::Rayleigh),
            "unit" => Ok(FadingModel::Unit),
            other => Err(Error::Config(format!(
                "unknown fading model '{other}' (expected rayleigh or unit)"
            ))),
        }
    }
}

/// Per-round protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub l_data: usize,
    pub spreading_factor: usize,
    pub noise_variance: f64,
    pub n_retx: usize,
    pub scheme: Scheme,
    pub detection: DetectionKind,
    pub mud_iterations: usize,
    pub path_loss_alpha: f64,
    pub tx_power: f64,
    /// Relay frame delays are drawn uniformly from `[0, max_delay_chips)`.
    pub max_delay_chips: usize,
    pub fading: FadingModel,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_data < 2 {
            return Err(Error::Config(format!(
                "data length must be >= 2 bits, got {}",
                self.l_data
            )));
        }
        if self.spreading_factor < 1 {
            return Err(Error::Config("spreading factor must be >= 1".into()));
        }
        if !self.noise_variance.is_finite() || self.noise_variance < 0.0 {
            return Err(Error::Config(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.noise_variance
            )));
        }
        if self.mud_iterations < 1 {
            return Err(Error::Config("detector iterations must be >= 1".into()));
        }
        if self.tx_power.is_nan() || self.tx_power < 0.0 {
            return Err(Error::Config("transmit power must be nonnegative".into()));
        }
        if !self.path_loss_alpha.is_finite() {
            return Err(Error::Config("path loss exponent must be finite".into()));
        }
        if let DetectionKind::Threshold(t) = self.detection {
            if t.is_nan() || t < 0.0 {
                return Err(Error::Config(format!(
                    "confidence threshold must be nonnegative, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// What one transmission event was, for the conservation audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxKind {
    /// First-slot CDMA transmission from a source.
    InitialCdma,
    /// Relay partial retransmission over IDMA.
    RelayPartial,
    /// Entire-packet retransmission from the source.
    SourceFull,
}

/// One transmission, attributed to the source packet it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxEvent {
    pub kind: TxKind,
    pub source: usize,
    pub bits: u64,
}

/// Per-source result of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceOutcome {
    pub accepted: bool,
    /// Transmission attempts consumed, counting the first slot.
    pub attempts: usize,
    /// Data+CRC bits transmitted for this packet by its source and relays.
    pub bits_transmitted: u64,
    /// Accounted feedback-request bits (descriptor plus payload fields).
    pub feedback_bits: u64,
    /// Positions overwritten by retransmitted bits across all repairs.
    pub repaired_bits: u64,
}

/// Everything one round produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub per_source: Vec<SourceOutcome>,
    pub tx_log: Vec<TxEvent>,
    /// The packet the destination accepted for each source, when any.
    pub delivered: Vec<Option<Packet>>,
}

impl RoundOutcome {
    /// Sum of per-source transmitted bits.
    pub fn total_transmitted(&self) -> u64 {
        self.per_source.iter().map(|s| s.bits_transmitted).sum()
    }

    /// Sum of per-source feedback bits.
    pub fn total_feedback(&self) -> u64 {
        self.per_source.iter().map(|s| s.feedback_bits).sum()
    }

    /// Independent recount of transmitted bits from the event log.
    pub fn audit_transmitted(&self) -> u64 {
        self.tx_log.iter().map(|e| e.bits).sum()
    }
}

/// Greedy relay assignment: sources in index order each take the eligible,
/// still-unassigned relay with the largest relay-to-destination gain.
/// `eligible[s][r]` says whether relay `r` holds a clean copy of source
/// `s`'s packet.
pub fn select_best_relay(
    relay_dest_gains: &[f64],
    eligible: &[Vec<bool>],
) -> Vec<Option<usize>> {
    let mut taken = vec![false; relay_dest_gains.len()];
    eligible
        .iter()
        .map(|row| {
            let pick = relay_dest_gains
                .iter()
                .enumerate()
                .filter(|&(r, _)| r < row.len() && row[r] && !taken[r])
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite gains"))
                .map(|(r, _)| r);
            if let Some(r) = pick {
                taken[r] = true;
            }
            pick
        })
        .collect()
}

/// Overwrites the requested positions of a hard-decided packet with the
/// retransmitted bits; everything else keeps its original hard decision.
/// `retx_bits` holds one bit vector per request block, in block order.
pub fn repair(
    soft: &SoftBitVector,
    req: &BlockRequest,
    retx_bits: &[Vec<u8>],
) -> Result<Packet> {
    if retx_bits.len() != req.blocks().len() {
        return Err(Error::InvalidInput(format!(
            "{} retransmitted blocks for {} requested",
            retx_bits.len(),
            req.blocks().len()
        )));
    }
    if req.packet_len() > soft.len() {
        return Err(Error::InvalidInput(format!(
            "request addresses {} positions but only {} were received",
            req.packet_len(),
            soft.len()
        )));
    }
    let mut bits = hard_decide(soft);
    for (block, chunk) in req.blocks().iter().zip(retx_bits) {
        if chunk.len() != block.length() {
            return Err(Error::InvalidInput(format!(
                "block at {} expects {} bits, got {}",
                block.start(),
                block.length(),
                chunk.len()
            )));
        }
        for (offset, &b) in chunk.iter().enumerate() {
            if b > 1 {
                return Err(Error::InvalidInput("bits must be 0 or 1".into()));
            }
            bits[block.start() - 1 + offset] = b;
        }
    }
    Packet::from_bits(&bits)
}

struct SourceState {
    packet: Packet,
    spread_signal: ChipSignal,
    delivered: Option<Packet>,
    /// This packet's source-to-destination fade, fixed for the round.
    direct_link: LinkState,
    sequence: SpreadingSequence,
    /// Working soft vector at the destination; repaired positions carry
    /// infinite confidence.
    soft: SoftBitVector,
    accepted: bool,
    attempts: usize,
    bits_transmitted: u64,
    feedback_bits: u64,
    repaired_bits: u64,
}

fn draw_round_link<R: Rng>(
    cfg: &ProtocolConfig,
    distance_m: f64,
    rng: &mut R,
) -> Result<LinkState> {
    let fading = match cfg.fading {
        FadingModel::Rayleigh => draw_fading_power(rng),
        FadingModel::Unit => 1.0,
    };
    LinkState::from_parts(fading, distance_m, cfg.path_loss_alpha, cfg.tx_power)
}

/// Runs one protocol round: every source sends one fresh packet and the
/// configured scheme retries failures until acceptance or attempt
/// exhaustion. All transmitted, feedback, and repaired bits are accounted
/// in the outcome.
pub fn run_round<R: Rng>(
    nodes: &NodeSet,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<RoundOutcome> {
    cfg.validate()?;
    let k = nodes.num_sources();
    let u = nodes.num_relays();
    let v = cfg.spreading_factor;
    let w = cfg.l_data + CRC_BITS;
    let noise = if cfg.noise_variance > 0.0 {
        NoiseModel::new(cfg.noise_variance)?
    } else {
        NoiseModel::noiseless()
    };

    // Slot 1: every source transmits its packet simultaneously over CDMA.
    // Fading is quasi-static over a packet's lifetime: every link gets one
    // draw per round, and retries see the same fade with fresh noise.
    let mut sources = Vec::with_capacity(k);
    for _ in 0..k {
        let data: Vec<u8> = (0..cfg.l_data).map(|_| (rng.next_u32() & 1) as u8).collect();
        let packet = crc_append(&data)?;
        let tx_bits = packet.bits();
        let sequence = SpreadingSequence::random(v, rng)?;
        let spread_signal = spread(&tx_bits, &sequence)?;
        let direct_link = draw_round_link(cfg, nodes.d_sd_m(), rng)?;
        sources.push(SourceState {
            packet,
            spread_signal,
            delivered: None,
            direct_link,
            sequence,
            soft: SoftBitVector::new(Vec::new()),
            accepted: false,
            attempts: 1,
            bits_transmitted: w as u64,
            feedback_bits: 0,
            repaired_bits: 0,
        });
    }
    let relay_sequences: Vec<SpreadingSequence> = (0..u)
        .map(|_| SpreadingSequence::random(v, rng))
        .collect::<Result<_>>()?;

    let mut tx_log: Vec<TxEvent> = (0..k)
        .map(|s| TxEvent {
            kind: TxKind::InitialCdma,
            source: s,
            bits: w as u64,
        })
        .collect();

    let dest_frames: Vec<TxFrame> = sources
        .iter()
        .map(|src| TxFrame {
            signal: src.spread_signal.clone(),
            delay_chips: 0,
            link: src.direct_link,
        })
        .collect();
    let y_dest = superpose(&dest_frames, noise, rng)?;
    for src in sources.iter_mut() {
        src.soft = despread_soft(&y_dest, &src.sequence, w)?;
    }

    // Relays decode their own copies; a relay may assist a source only if
    // its slot-1 CRC passed.
    let mut relay_copy: Vec<Vec<Option<Vec<u8>>>> = vec![vec![None; k]; u];
    for relay_row in relay_copy.iter_mut() {
        let relay_frames: Vec<TxFrame> = sources
            .iter()
            .map(|src| {
                Ok(TxFrame {
                    signal: src.spread_signal.clone(),
                    delay_chips: 0,
                    link: draw_round_link(cfg, nodes.d_sr_m(), rng)?,
                })
            })
            .collect::<Result<_>>()?;
        let y_relay = superpose(&relay_frames, noise, rng)?;
        for (s, src) in sources.iter().enumerate() {
            let decoded = hard_decide(&despread_soft(&y_relay, &src.sequence, w)?);
            if crc_check(&Packet::from_bits(&decoded)?) {
                relay_row[s] = Some(decoded);
            }
        }
    }

    // Relay-to-destination fades for the round.
    let relay_links: Vec<LinkState> = (0..u)
        .map(|_| draw_round_link(cfg, nodes.d_rd_m(), rng))
        .collect::<Result<_>>()?;

    // Slot 2 of the first attempt: CRC check.
    for src in sources.iter_mut() {
        let received = Packet::from_bits(&hard_decide(&src.soft))?;
        src.accepted = crc_check(&received);
        if src.accepted {
            src.delivered = Some(received);
        }
    }

    // Retry slots 2-3 until everything is accepted or attempts exhaust.
    loop {
        let active: Vec<usize> = sources
            .iter()
            .enumerate()
            .filter(|(_, src)| !src.accepted && src.attempts < cfg.n_retx + 1)
            .map(|(s, _)| s)
            .collect();
        if active.is_empty() {
            break;
        }

        match cfg.scheme {
            Scheme::TraditionalArq => {
                retransmit_full(&active, &mut sources, cfg, noise, rng, &mut tx_log)?;
            }
            Scheme::IdmaPpr => {
                // Build this attempt's requests.
                let mut partial: Vec<(usize, BlockRequest)> = Vec::new();
                let mut full: Vec<usize> = Vec::new();
                for &s in &active {
                    let src = &mut sources[s];
                    match detect_for(cfg, src)? {
                        RepairPlan::FullRetransmit => full.push(s),
                        RepairPlan::Partial(set) => {
                            let req = build_request(&set, cfg.l_data)?;
                            src.feedback_bits += req.total_cost_bits();
                            // The request crosses the error-free feedback
                            // channel bit-exactly.
                            let wire = encode_request(&req)?;
                            let req = decode_request(&wire, cfg.l_data)?;
                            partial.push((s, req));
                        }
                    }
                }

                // The best decode-capable relay (largest gain toward the
                // destination) answers each request.
                let gains: Vec<f64> = relay_links.iter().map(|l| l.gain()).collect();
                let eligible: Vec<Vec<bool>> = partial
                    .iter()
                    .map(|&(s, _)| (0..u).map(|r| relay_copy[r][s].is_some()).collect())
                    .collect();
                let assignment = select_best_relay(&gains, &eligible);

                let mut frames: Vec<IdmaFrame> = Vec::new();
                let mut frame_meta: Vec<(usize, BlockRequest)> = Vec::new();
                for ((s, req), pick) in partial.into_iter().zip(assignment) {
                    match pick {
                        Some(r) => {
                            let copy = relay_copy[r][s].as_ref().expect("eligible relay");
                            let mut retx = Vec::with_capacity(req.payload_bits() as usize);
                            for b in req.blocks() {
                                retx.extend_from_slice(
                                    &copy[b.start() - 1..b.start() - 1 + b.length()],
                                );
                            }
                            let interleaver =
                                Interleaver::from_seed(retx.len() * v, rng.next_u64());
                            let delay = if cfg.max_delay_chips > 0 {
                                rng.random_range(0..cfg.max_delay_chips)
                            } else {
                                0
                            };
                            let frame = IdmaFrame::encode(
                                r,
                                &retx,
                                relay_sequences[r].clone(),
                                interleaver,
                                delay,
                                relay_links[r],
                            )?;
                            let src = &mut sources[s];
                            src.attempts += 1;
                            src.bits_transmitted += retx.len() as u64;
                            tx_log.push(TxEvent {
                                kind: TxKind::RelayPartial,
                                source: s,
                                bits: retx.len() as u64,
                            });
                            frames.push(frame);
                            frame_meta.push((s, req));
                        }
                        None => full.push(s),
                    }
                }

                // All relay frames share the channel (the asynchronous
                // multi-packet composite the detector exists for).
                if !frames.is_empty() {
                    let channel_frames: Vec<TxFrame> = frames
                        .iter()
                        .map(|f| TxFrame {
                            signal: f.chips.clone(),
                            delay_chips: f.delay_chips,
                            link: f.link,
                        })
                        .collect();
                    let y3 = superpose(&channel_frames, noise, rng)?;
                    let mud = mud_detect(&y3, &frames, cfg.noise_variance, cfg.mud_iterations)?;
                    for (idx, (s, req)) in frame_meta.iter().enumerate() {
                        let decoded = &mud.decisions[idx];
                        let mut chunks = Vec::with_capacity(req.blocks().len());
                        let mut at = 0usize;
                        for b in req.blocks() {
                            chunks.push(decoded[at..at + b.length()].to_vec());
                            at += b.length();
                        }
                        let src = &mut sources[*s];
                        let repaired = repair(&src.soft, req, &chunks)?;
                        let repaired_bits = repaired.bits();
                        for b in req.blocks() {
                            for pos in b.start()..=b.end() {
                                src.soft.values_mut()[pos - 1] = if repaired_bits[pos - 1] == 1 {
                                    f64::INFINITY
                                } else {
                                    f64::NEG_INFINITY
                                };
                            }
                        }
                        src.repaired_bits += req.payload_bits();
                        src.accepted = crc_check(&repaired);
                        if src.accepted {
                            src.delivered = Some(repaired);
                        }
                    }
                }

                // Sources the relays could not serve fall back to an
                // entire-packet retransmission in the same attempt.
                full.sort_unstable();
                if !full.is_empty() {
                    retransmit_full(&full, &mut sources, cfg, noise, rng, &mut tx_log)?;
                }
            }
        }
    }

    let per_source = sources
        .iter()
        .map(|src| SourceOutcome {
            accepted: src.accepted,
            attempts: src.attempts,
            bits_transmitted: src.bits_transmitted,
            feedback_bits: src.feedback_bits,
            repaired_bits: src.repaired_bits,
        })
        .collect();
    let delivered = sources.into_iter().map(|src| src.delivered).collect();
    Ok(RoundOutcome {
        per_source,
        tx_log,
        delivered,
    })
}

/// Entire-packet retransmissions for the listed sources, transmitted
/// simultaneously over CDMA like the first slot. Each source's working
/// soft vector is replaced by the fresh reception.
fn retransmit_full<R: Rng>(
    which: &[usize],
    sources: &mut [SourceState],
    cfg: &ProtocolConfig,
    noise: NoiseModel,
    rng: &mut R,
    tx_log: &mut Vec<TxEvent>,
) -> Result<()> {
    let w = cfg.l_data + CRC_BITS;
    let frames: Vec<TxFrame> = which
        .iter()
        .map(|&s| TxFrame {
            signal: sources[s].spread_signal.clone(),
            delay_chips: 0,
            link: sources[s].direct_link,
        })
        .collect();
    let y = superpose(&frames, noise, rng)?;
    for &s in which {
        let src = &mut sources[s];
        src.soft = despread_soft(&y, &src.sequence, w)?;
        src.attempts += 1;
        src.bits_transmitted += w as u64;
        tx_log.push(TxEvent {
            kind: TxKind::SourceFull,
            source: s,
            bits: w as u64,
        });
        let received = Packet::from_bits(&hard_decide(&src.soft))?;
        src.accepted = crc_check(&received);
        if src.accepted {
            src.delivered = Some(received);
        }
    }
    Ok(())
}

/// What slot-2 detection asks slot 3 to do for one failed packet.
enum RepairPlan {
    /// Request these data positions from a relay.
    Partial(UnreliableSet),
    /// Partial recovery cannot fix this packet; retransmit it whole.
    FullRetransmit,
}

fn detect_for(cfg: &ProtocolConfig, src: &SourceState) -> Result<RepairPlan> {
    match cfg.detection {
        DetectionKind::Threshold(t) => {
            // The wire format indexes data positions, so thresholding runs
            // over the data prefix. An empty set with a failing CRC means
            // detection has nothing left to request.
            let set = detect_unreliable(&src.soft.prefix(cfg.l_data), t)?;
            if set.is_empty() {
                Ok(RepairPlan::FullRetransmit)
            } else {
                Ok(RepairPlan::Partial(set))
            }
        }
        DetectionKind::Genie => {
            // The upper bound knows every erroneous position in the whole
            // packet. Errors inside the CRC field cannot be requested, so
            // the genie escalates straight to a full retransmission.
            let decoded = hard_decide(&src.soft);
            let set = genie_unreliable(&decoded, &src.packet.bits())?;
            match set.indices().last() {
                None => Ok(RepairPlan::FullRetransmit), // unreachable: CRC failed
                Some(&last) if last > cfg.l_data => Ok(RepairPlan::FullRetransmit),
                Some(_) => Ok(RepairPlan::Partial(UnreliableSet::new(
                    set.indices().to_vec(),
                    cfg.l_data,
                )?)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn base_config(scheme: Scheme, detection: DetectionKind) -> ProtocolConfig {
        ProtocolConfig {
            l_data: 128,
            spreading_factor: 16,
            noise_variance: 1e-9,
            n_retx: 4,
            scheme,
            detection,
            mud_iterations: 10,
            path_loss_alpha: 4.0,
            tx_power: 1.0,
            max_delay_chips: 16,
            fading: FadingModel::Rayleigh,
        }
    }

    #[test]
    fn crc_known_check_value() {
        // "123456789" as bytes, bits most-significant first.
        let mut bits = Vec::new();
        for byte in b"123456789" {
            for k in (0..8).rev() {
                bits.push((byte >> k) & 1);
            }
        }
        assert_eq!(crc16_ccitt_false(&bits), 0x29B1);
    }

    #[test]
    fn crc_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for len in [1usize, 7, 64, 128] {
            let data: Vec<u8> = (0..len).map(|_| (rng.next_u32() & 1) as u8).collect();
            let packet = crc_append(&data).unwrap();
            assert!(crc_check(&packet));
            assert_eq!(packet.len(), len + CRC_BITS);
        }
    }

    #[test]
    fn any_single_bit_flip_is_detected() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let data: Vec<u8> = (0..128).map(|_| (rng.next_u32() & 1) as u8).collect();
        let packet = crc_append(&data).unwrap();
        let bits = packet.bits();
        for i in 0..bits.len() {
            let mut flipped = bits.clone();
            flipped[i] ^= 1;
            assert!(
                !crc_check(&Packet::from_bits(&flipped).unwrap()),
                "flip at {i} went undetected"
            );
        }
    }

    #[test]
    fn relay_selection_takes_largest_gain() {
        let picks = select_best_relay(&[0.9, 0.1, 0.5], &[vec![true, true, true]]);
        assert_eq!(picks, vec![Some(0)]);
    }

    #[test]
    fn relay_selection_is_greedy_without_replacement() {
        let picks = select_best_relay(
            &[0.9, 0.1, 0.5],
            &[vec![true, true, true], vec![true, true, true]],
        );
        assert_eq!(picks, vec![Some(0), Some(2)]);
    }

    #[test]
    fn relay_selection_respects_eligibility() {
        let picks = select_best_relay(&[0.9, 0.1, 0.5], &[vec![false, true, false]]);
        assert_eq!(picks, vec![Some(1)]);
    }

    #[test]
    fn relay_selection_can_fail() {
        let picks = select_best_relay(&[0.9], &[vec![false]]);
        assert_eq!(picks, vec![None]);
    }

    #[test]
    fn repair_with_empty_request_is_hard_decision() {
        let soft = SoftBitVector::new(
            (0..144)
                .map(|i| if i % 3 == 0 { -0.5 } else { 0.5 })
                .collect(),
        );
        let req = BlockRequest::empty(128).unwrap();
        let packet = repair(&soft, &req, &[]).unwrap();
        assert_eq!(packet.bits(), hard_decide(&soft));
    }

    #[test]
    fn repair_full_coverage_takes_retransmission() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let truth: Vec<u8> = (0..128).map(|_| (rng.next_u32() & 1) as u8).collect();
        let soft = SoftBitVector::new(vec![-1.0; 144]);
        let req = BlockRequest::new(
            vec![crate::feedback::Block::new(1, 128).unwrap()],
            128,
        )
        .unwrap();
        let packet = repair(&soft, &req, std::slice::from_ref(&truth)).unwrap();
        assert_eq!(packet.data_bits(), &truth);
    }

    #[test]
    fn repair_rejects_block_mismatch() {
        let soft = SoftBitVector::new(vec![1.0; 144]);
        let req = BlockRequest::new(
            vec![crate::feedback::Block::new(5, 3).unwrap()],
            128,
        )
        .unwrap();
        assert!(repair(&soft, &req, &[vec![1, 0]]).is_err());
        assert!(repair(&soft, &req, &[]).is_err());
    }

    #[test]
    fn noiseless_round_accepts_everything_first_attempt() {
        for scheme in [Scheme::TraditionalArq, Scheme::IdmaPpr] {
            let mut cfg = base_config(scheme, DetectionKind::Genie);
            cfg.noise_variance = 0.0;
            cfg.fading = FadingModel::Unit;
            let nodes = NodeSet::new(2, 3, 100.0, 50.0, 50.0).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(4);
            let outcome = run_round(&nodes, &cfg, &mut rng).unwrap();
            for src in &outcome.per_source {
                assert!(src.accepted);
                assert_eq!(src.attempts, 1);
                assert_eq!(src.feedback_bits, 0);
                assert_eq!(src.bits_transmitted, 144);
            }
        }
    }

    #[test]
    fn rounds_are_deterministic_under_a_seed() {
        // A noisy operating point so retransmissions actually happen.
        let mut cfg = base_config(Scheme::IdmaPpr, DetectionKind::Genie);
        cfg.noise_variance = 1e-8;
        let nodes = NodeSet::new(2, 3, 100.0, 50.0, 50.0).unwrap();
        let mut rng1 = ChaCha12Rng::seed_from_u64(99);
        let mut rng2 = ChaCha12Rng::seed_from_u64(99);
        let a = run_round(&nodes, &cfg, &mut rng1).unwrap();
        let b = run_round(&nodes, &cfg, &mut rng2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attempts_never_exceed_the_bound() {
        let mut cfg = base_config(Scheme::IdmaPpr, DetectionKind::Genie);
        cfg.noise_variance = 3e-8; // low SNR, frequent retries
        cfg.n_retx = 3;
        let nodes = NodeSet::new(2, 3, 100.0, 50.0, 50.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let outcome = run_round(&nodes, &cfg, &mut rng).unwrap();
            for src in &outcome.per_source {
                assert!(src.attempts <= cfg.n_retx + 1);
            }
            assert_eq!(outcome.total_transmitted(), outcome.audit_transmitted());
        }
    }

    #[test]
    fn config_validation_happens_before_transmission() {
        let mut cfg = base_config(Scheme::IdmaPpr, DetectionKind::Genie);
        cfg.l_data = 1;
        let nodes = NodeSet::new(1, 1, 100.0, 50.0, 50.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        assert!(matches!(
            run_round(&nodes, &cfg, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unreachable_relays_degenerate_to_full_retransmissions() {
        // Relays too far from the sources never pass their slot-1 CRC, so
        // every recovery attempt falls back to an entire-packet source
        // retransmission: structurally a traditional-ARQ trajectory.
        let mut cfg = base_config(Scheme::IdmaPpr, DetectionKind::Genie);
        cfg.noise_variance = 2e-8;
        let nodes = NodeSet::new(2, 3, 100.0, 50.0, 1e7).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut saw_retry = false;
        for _ in 0..30 {
            let outcome = run_round(&nodes, &cfg, &mut rng).unwrap();
            for event in &outcome.tx_log {
                match event.kind {
                    TxKind::RelayPartial => panic!("no relay should be able to assist"),
                    TxKind::SourceFull => {
                        saw_retry = true;
                        assert_eq!(event.bits, 144);
                    }
                    TxKind::InitialCdma => {}
                }
            }
        }
        assert!(saw_retry, "expected at least one fallback retransmission");
    }

    #[test]
    fn node_set_rejects_bad_geometry() {
        assert!(NodeSet::new(0, 1, 100.0, 50.0, 50.0).is_err());
        assert!(NodeSet::new(2, 1, 100.0, 50.0, 50.0).is_err());
        assert!(NodeSet::new(1, 1, 100.0, 0.0, 50.0).is_err());
        assert!(NodeSet::new(1, 1, 0.0, 50.0, 50.0).is_err());
        assert!(NodeSet::new(1, 1, 100.0, 50.0, -1.0).is_err());
    }
}
