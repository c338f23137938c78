//! Plain-text `key = value` configuration covering engine and device fields.
//!
//! ```text
//! # comments and blank lines are ignored
//! width = 8
//! parallelism = 64
//! energy_granularity = per_track
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mac::MacConfig;

fn parse<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("line {line}: bad value '{v}' for {key}")))
}

/// Applies one setting to `cfg` without validating the result.
pub fn apply(cfg: &mut MacConfig, key: &str, value: &str, line: usize) -> Result<()> {
    let v = value.trim();
    let r = &mut cfg.rtm;
    match key.trim() {
        "width" => cfg.width = parse(line, key, v)?,
        "parallelism" => {
            let p: u32 = parse(line, key, v)?;
            if !(p >= 2 && p.is_power_of_two()) {
                return Err(Error::BadParallelism(p));
            }
            cfg.seg_exp = p.trailing_zeros();
        }
        "seed_compressed" => cfg.seed_compressed = parse(line, key, v)?,
        "signed" => cfg.signed = parse(line, key, v)?,
        "pipelined" => cfg.pipelined = parse(line, key, v)?,
        "output_cycles_per_segment" => cfg.output_cycles_per_segment = parse(line, key, v)?,
        "output_power_mw" => cfg.output_power_mw = Some(parse(line, key, v)?),
        "clock_ns" => cfg.clock_ns = parse(line, key, v)?,
        "tree_adder_latency_cycles" => cfg.tree_adder_latency_cycles = parse(line, key, v)?,
        "tree_adder_inputs" => cfg.tree_adder_inputs = parse(line, key, v)?,
        "accumulate_adder_cycles" => cfg.accumulate_adder_cycles = parse(line, key, v)?,
        "signed_adder_cycles" => cfg.signed_adder_cycles = parse(line, key, v)?,
        "adder_energy_pj" => cfg.adder_energy_pj = parse(line, key, v)?,
        "output_units" => cfg.output_units = parse(line, key, v)?,
        "dbcs" => cfg.dbcs = parse(line, key, v)?,
        "domains_per_track" => r.domains_per_track = parse(line, key, v)?,
        "parts_per_track" => r.parts_per_track = parse(line, key, v)?,
        "valid_per_part" => r.valid_per_part = parse(line, key, v)?,
        "trd_domains" => r.trd_domains = parse(line, key, v)?,
        "ports_per_track" => r.ports_per_track = parse(line, key, v)?,
        "tracks_per_dbc" => r.tracks_per_dbc = parse(line, key, v)?,
        "shift_cycles" => r.shift_cycles = parse(line, key, v)?,
        "write_cycles" => r.write_cycles = parse(line, key, v)?,
        "tr_cycles" => r.tr_cycles = parse(line, key, v)?,
        "read_cycles" => r.read_cycles = parse(line, key, v)?,
        "shift_energy_pj" => r.shift_energy_pj = parse(line, key, v)?,
        "write_energy_pj" => r.write_energy_pj = parse(line, key, v)?,
        "tr_energy_pj" => r.tr_energy_pj = parse(line, key, v)?,
        "read_energy_pj" => r.read_energy_pj = parse(line, key, v)?,
        "shifts_per_write" => r.shifts_per_write = parse(line, key, v)?,
        "energy_granularity" => r.energy_granularity = v.parse()?,
        "tr_noise_sigma" => r.tr_noise_sigma = parse(line, key, v)?,
        "tr_noise_seed" => r.tr_noise_seed = parse(line, key, v)?,
        other => return Err(Error::Config(format!("line {line}: unknown key '{other}'"))),
    }
    Ok(())
}

/// Parses settings on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<MacConfig> {
    let mut cfg = MacConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        apply(&mut cfg, k, v, i + 1)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<MacConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
