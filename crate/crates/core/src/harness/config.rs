//! Flat `key=value` configuration files and threshold-table files.
//!
//! Config lines hold one `key=value` pair each; `#` starts a comment and
//! blank lines are skipped. List values are comma-separated. A threshold
//! table can be given inline as `threshold_table=<snr>:<t>,...` or loaded
//! from a separate file of `<snr>=<t>` lines via `threshold_file=<path>`.

use std::path::Path;

use crate::detect::{DetectionMode, ThresholdTable};
use crate::error::{Error, Result};
use crate::harness::SimConfig;
use crate::protocol::{FadingModel, Scheme};

/// Parses one flat key=value document into pairs, preserving order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key=value, got '{line}'",
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{value}'")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected an integer, got '{value}'")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!(
            "{key}: expected true/false, got '{value}'"
        ))),
    }
}

pub fn parse_f64_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_f64(key, v.trim())).collect()
}

pub fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|v| parse_usize(key, v.trim())).collect()
}

pub fn parse_scheme_list(value: &str) -> Result<Vec<Scheme>> {
    value.split(',').map(|v| v.trim().parse()).collect()
}

/// Inline threshold table: comma-separated `<snr>:<t>` pairs.
pub fn parse_inline_threshold_table(value: &str) -> Result<ThresholdTable> {
    let mut entries = Vec::new();
    for item in value.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let Some((snr, t)) = item.split_once(':') else {
            return Err(Error::Config(format!(
                "threshold_table: expected <snr>:<t>, got '{item}'"
            )));
        };
        entries.push((
            parse_f64("threshold_table", snr.trim())?,
            parse_f64("threshold_table", t.trim())?,
        ));
    }
    ThresholdTable::new(entries)
}

/// Applies one key=value pair onto a config. Unknown keys are errors.
pub fn apply_key(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "k" | "num_sources" => cfg.num_sources = parse_usize(key, value)?,
        "u" | "num_relays" => cfg.num_relays = parse_usize(key, value)?,
        "l_data" => cfg.l_data = parse_usize(key, value)?,
        "v" | "spreading_factor" => cfg.spreading_factor = parse_usize(key, value)?,
        "path_loss_alpha" => cfg.path_loss_alpha = parse_f64(key, value)?,
        "d_sd_m" => cfg.d_sd_m = parse_f64(key, value)?,
        "d_rd_m" => cfg.d_rd_m = parse_f64_list(key, value)?,
        "d_sr_m" => cfg.d_sr_m = parse_f64(key, value)?,
        "snr_db" => cfg.snr_db = parse_f64_list(key, value)?,
        "n_retx" => cfg.n_retx = parse_usize_list(key, value)?,
        "scheme" => cfg.schemes = parse_scheme_list(value)?,
        "detection" => cfg.detection = value.parse::<DetectionMode>()?,
        "trials" => cfg.trials = parse_usize(key, value)?,
        "seed" => cfg.master_seed = parse_u64(key, value)?,
        "mud_iterations" => cfg.mud_iterations = parse_usize(key, value)?,
        "max_delay_chips" => cfg.max_delay_chips = parse_usize(key, value)?,
        "tx_power" => cfg.tx_power = parse_f64(key, value)?,
        "noiseless" => cfg.noiseless = parse_bool(key, value)?,
        "fading" => cfg.fading = value.parse::<FadingModel>()?,
        "threshold_table" => cfg.threshold_table = parse_inline_threshold_table(value)?,
        "threshold_file" => {
            cfg.threshold_table = read_threshold_table_file(Path::new(value))?;
        }
        other => {
            return Err(Error::Config(format!("unknown configuration key '{other}'")));
        }
    }
    Ok(())
}

/// Applies a whole config document onto defaults (or a partially-built
/// config when flags already changed it).
pub fn apply_document(cfg: &mut SimConfig, text: &str) -> Result<()> {
    for (key, value) in parse_kv(text)? {
        apply_key(cfg, &key, &value)?;
    }
    Ok(())
}

/// Loads a config file over the given base configuration.
pub fn load_config_file(path: &Path, cfg: &mut SimConfig) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    apply_document(cfg, &text)
}

/// Threshold-table file: one `<snr_db>=<threshold>` line per entry.
pub fn read_threshold_table_file(path: &Path) -> Result<ThresholdTable> {
    let text = std::fs::read_to_string(path)?;
    parse_threshold_table(&text)
}

pub fn parse_threshold_table(text: &str) -> Result<ThresholdTable> {
    let mut entries = Vec::new();
    for (key, value) in parse_kv(text)? {
        entries.push((
            parse_f64("threshold table key", &key)?,
            parse_f64("threshold", &value)?,
        ));
    }
    ThresholdTable::new(entries)
}

pub fn render_threshold_table(table: &ThresholdTable) -> String {
    let mut out = String::new();
    for (snr, t) in table.entries() {
        out.push_str(&format!("{snr}={t:e}\n"));
    }
    out
}

pub fn write_threshold_table_file(path: &Path, table: &ThresholdTable) -> Result<()> {
    std::fs::write(path, render_threshold_table(table))?;
    Ok(())
}
