//! Unreliable-bit detection: confidence thresholding of soft bits, the
//! genie oracle used for upper-bound runs, and SNR-indexed threshold lookup.

use crate::error::{Error, Result};
use crate::phy::SoftBitVector;

/// How unreliable bits are identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectionMode {
    /// Compare confidence values against a preset threshold.
    Threshold,
    /// Oracle mode: the true error positions are known.
    Genie,
}

impl DetectionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectionMode::Threshold => "threshold",
            DetectionMode::Genie => "genie",
        }
    }
}

impl std::str::FromStr for DetectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "threshold" => Ok(DetectionMode::Threshold),
            "genie" => Ok(DetectionMode::Genie),
            other => Err(Error::Config(format!(
                "unknown detection mode '{other}' (expected threshold or genie)"
            ))),
        }
    }
}

impl std::fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Confidence thresholds indexed by SNR in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    entries: Vec<(f64, f64)>,
}

impl ThresholdTable {
    /// Builds a table from `(snr_db, threshold)` pairs. Thresholds must be
    /// nonnegative and SNR keys unique; entries are kept sorted by SNR.
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        for &(snr, t) in &entries {
            if !snr.is_finite() {
                return Err(Error::Config(format!("non-finite SNR key {snr}")));
            }
            if t.is_nan() || t < 0.0 {
                return Err(Error::Config(format!(
                    "threshold for {snr} dB must be nonnegative, got {t}"
                )));
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys"));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("duplicate SNR key in threshold table".into()));
        }
        Ok(Self { entries })
    }

    /// The thresholds used in the reference simulations, for SNRs -5..25 dB
    /// in 5 dB steps. They are tied to that setup's power normalization;
    /// recalibrate for other operating points (see the `calibrate` CLI
    /// subcommand).
    pub fn simulation_defaults() -> Self {
        let scale = 1e-6;
        Self::new(vec![
            (-5.0, 0.9 * scale),
            (0.0, 1.0 * scale),
            (5.0, 1.5 * scale),
            (10.0, 2.5 * scale),
            (15.0, 4.0 * scale),
            (20.0, 6.0 * scale),
            (25.0, 11.0 * scale),
        ])
        .expect("default table is valid")
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Detection configuration: the mode and, for threshold mode, the table.
#[derive(Debug, Clone)]
pub struct DetectionConfig {
    pub mode: DetectionMode,
    pub threshold_table: ThresholdTable,
}

/// Strictly increasing 1-based positions of bits judged unreliable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnreliableSet {
    indices: Vec<usize>,
}

impl UnreliableSet {
    /// Validates that indices are sorted, unique, and within `[1, packet_len]`.
    pub fn new(indices: Vec<usize>, packet_len: usize) -> Result<Self> {
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(
                    "unreliable indices must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (indices.first(), indices.last()) {
            if first < 1 || last > packet_len {
                return Err(Error::InvalidInput(format!(
                    "unreliable index out of range 1..={packet_len}"
                )));
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

/// Labels bit `i` unreliable when its confidence `|c(i)|` is at or below the
/// threshold. The boundary `|c| = T` is unreliable: only a strictly larger
/// confidence makes a good bit.
pub fn detect_unreliable(soft: &SoftBitVector, threshold: f64) -> Result<UnreliableSet> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidInput(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let indices = soft
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c.abs() <= threshold)
        .map(|(i, _)| i + 1)
        .collect();
    UnreliableSet::new(indices, soft.len())
}

/// Oracle detection: the unreliable set is exactly the positions where the
/// decoded bits differ from the truth.
pub fn genie_unreliable(decoded: &[u8], truth: &[u8]) -> Result<UnreliableSet> {
    if decoded.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "genie inputs differ in length: {} vs {}",
            decoded.len(),
            truth.len()
        )));
    }
    let indices = decoded
        .iter()
        .zip(truth)
        .enumerate()
        .filter(|(_, (d, t))| d != t)
        .map(|(i, _)| i + 1)
        .collect();
    UnreliableSet::new(indices, decoded.len())
}

/// Looks up the threshold for an SNR: exact match when present, otherwise
/// the nearest key with ties resolved toward the lower SNR.
pub fn lookup_threshold(cfg: &DetectionConfig, snr_db: f64) -> Result<f64> {
    if cfg.threshold_table.is_empty() {
        return Err(Error::Config("threshold table is empty".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for &(key, t) in cfg.threshold_table.entries() {
        let dist = (key - snr_db).abs();
        let better = match best {
            None => true,
            // Entries are sorted ascending, so on a tie the earlier
            // (lower-SNR) key wins.
            Some((best_dist, _)) => dist < best_dist,
        };
        if better {
            best = Some((dist, t));
        }
    }
    Ok(best.expect("nonempty table").1)
}
