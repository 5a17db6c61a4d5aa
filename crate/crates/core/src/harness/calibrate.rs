//! Threshold recalibration: the shipped thresholds are tied to one power
//! normalization, so other operating points sweep the threshold over a log
//! grid and keep the value that maximizes partial-recovery throughput.

use crate::detect::{DetectionMode, ThresholdTable};
use crate::error::{Error, Result};
use crate::harness::{measure_point, throughput_ppr, SimConfig};
use crate::protocol::Scheme;

/// Sweep bounds for one calibration run.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            t_min: 1e-8,
            t_max: 1e-3,
            points: 21,
        }
    }
}

impl CalibrationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.t_min.is_nan() || self.t_min <= 0.0 || self.t_max.is_nan() || self.t_max <= self.t_min {
            return Err(Error::Config(format!(
                "need 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.points < 2 {
            return Err(Error::Config("calibration grid needs >= 2 points".into()));
        }
        Ok(())
    }

    /// Logarithmically spaced thresholds, inclusive of both bounds.
    pub fn thresholds(&self) -> Vec<f64> {
        let log_min = self.t_min.ln();
        let log_max = self.t_max.ln();
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    self.t_min
                } else if i == self.points - 1 {
                    self.t_max
                } else {
                    let f = i as f64 / (self.points - 1) as f64;
                    (log_min + f * (log_max - log_min)).exp()
                }
            })
            .collect()
    }
}

/// The chosen threshold and its measured throughput at one SNR.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationPoint {
    pub snr_db: f64,
    pub threshold: f64,
    pub throughput: f64,
}

/// Calibrates one threshold per configured SNR, at the first configured
/// relay distance and retransmission cap. Ties keep the smaller threshold.
pub fn calibrate_thresholds(
    cfg: &SimConfig,
    grid: &CalibrationGrid,
) -> Result<(ThresholdTable, Vec<CalibrationPoint>)> {
    grid.validate()?;
    cfg.validate()?;
    let d_rd = cfg.d_rd_m[0];
    let n_retx = cfg.n_retx[0];
    let mut points = Vec::with_capacity(cfg.snr_db.len());
    for &snr_db in &cfg.snr_db {
        let mut best: Option<(f64, f64)> = None; // (threshold, throughput)
        for t in grid.thresholds() {
            let mut probe = cfg.clone();
            probe.detection = DetectionMode::Threshold;
            probe.threshold_table = ThresholdTable::new(vec![(snr_db, t)])?;
            let ledger = measure_point(&probe, Scheme::IdmaPpr, snr_db, d_rd, n_retx)?;
            let tput = throughput_ppr(&ledger)?;
            if best.is_none_or(|(_, best_tput)| tput > best_tput) {
                best = Some((t, tput));
            }
        }
        let (threshold, throughput) = best.expect("grid has points");
        points.push(CalibrationPoint {
            snr_db,
            threshold,
            throughput,
        });
    }
    let table = ThresholdTable::new(
        points
            .iter()
            .map(|p| (p.snr_db, p.threshold))
            .collect(),
    )?;
    Ok((table, points))
}
