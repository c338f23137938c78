//! Energy metrics, storage footprints and design-space sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::mac::{MacConfig, MacEngine};
use crate::workload::Workload;

/// Operations per picojoule.
pub fn opj(ledger: &CostLedger, n_ops: u64) -> Result<f64> {
    let e = ledger.e_c() + ledger.e_r() + ledger.e_a();
    if e <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(n_ops as f64 / e)
}

/// Energy-delay product in pJ * cycles.
pub fn edp(ledger: &CostLedger) -> f64 {
    ledger.energy_pj() * ledger.cycles() as f64
}

/// `(seed, AND)` parts of the compressed layout per parallelism.
pub const COMPRESSED_PARTS: [(u32, usize, usize); 4] =
    [(4, 1, 1), (8, 2, 2), (16, 3, 3), (32, 6, 6)];

/// Parts needed to hold `s` output segments of parallelism `p`.
pub fn storage_parts(p: u32, s: usize, compressed: bool) -> Result<usize> {
    if s == 0 {
        return Err(Error::Data("segment count must be at least 1".into()));
    }
    if !(p >= 2 && p.is_power_of_two()) {
        return Err(Error::BadParallelism(p));
    }
    if compressed {
        let &(_, seed, and) =
            COMPRESSED_PARTS.iter().find(|r| r.0 == p).ok_or(Error::BadParallelism(p))?;
        Ok(seed + s.div_ceil(5) + and)
    } else {
        Ok((p as usize * s).div_ceil(5))
    }
}

/// Parts the engine actually occupies for one product.
pub fn layout_parts(cfg: &MacConfig, counter: u32, bedge: u32) -> usize {
    let valid = cfg.rtm.valid_per_part;
    let p = cfg.parallelism() as usize;
    let segs = counter as usize + usize::from(bedge > 0);
    if !cfg.seed_compressed {
        return (p * segs).div_ceil(valid);
    }
    let seed = (p - 1).div_ceil(valid);
    let mut n = 0;
    if counter > 0 {
        n += seed + (counter as usize).div_ceil(valid);
    }
    if bedge > 0 {
        n += seed;
    }
    n
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n: u32,
    pub p: u32,
    pub workload: String,
    pub cycles: u64,
    pub e_c_pj: f64,
    pub e_r_pj: f64,
    pub e_a_pj: f64,
    pub opj: f64,
    pub edp: f64,
    pub storage_parts: u64,
}

pub const SWEEP_HEADER: &str = "n,P,workload,cycles,e_c_pj,e_r_pj,e_a_pj,opj,edp,storage_parts";

impl SweepPoint {
    pub fn energy_pj(&self) -> f64 {
        self.e_c_pj + self.e_r_pj + self.e_a_pj
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3},{}",
            self.n,
            self.p,
            self.workload,
            self.cycles,
            self.e_c_pj,
            self.e_r_pj,
            self.e_a_pj,
            self.opj,
            self.edp,
            self.storage_parts
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Skipped grid points and monotonicity violations.
    pub diagnostics: Vec<String>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SWEEP_HEADER}\n");
        for p in &self.points {
            s.push_str(&p.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Evaluates `workload` in streaming mode at every `(n, P)` grid point.
/// Widths where `P >= 2^n` are skipped with a diagnostic.
pub fn sweep(
    widths: &[u32],
    parallelisms: &[u32],
    workload: &Workload,
    base: &MacConfig,
) -> Result<SweepReport> {
    if widths.is_empty() || parallelisms.is_empty() {
        return Err(Error::Config("sweep axes must be nonempty".into()));
    }
    if workload.terms.is_empty() {
        return Err(Error::Empty);
    }
    let mut grid = Vec::new();
    let mut diagnostics = Vec::new();
    for &n in widths {
        crate::codec::check_width(n)?;
        for &p in parallelisms {
            if !(p >= 2 && p.is_power_of_two()) {
                return Err(Error::BadParallelism(p));
            }
            if p >= 1 << n {
                diagnostics.push(format!("skipped n={n} P={p}: segment not shorter than sequence"));
                continue;
            }
            let cfg = MacConfig { width: n, seg_exp: p.trailing_zeros(), ..base.clone() };
            cfg.validate()?;
            grid.push(cfg);
        }
    }
    let points: Vec<SweepPoint> =
        grid.par_iter().map(|cfg| point(cfg, workload)).collect::<Result<_>>()?;
    diagnostics.extend(monotonicity(&points));
    Ok(SweepReport { points, diagnostics })
}

fn point(cfg: &MacConfig, workload: &Workload) -> Result<SweepPoint> {
    let terms = workload.rescaled(cfg.width);
    let r = MacEngine::new(cfg.clone())?.stream(&terms)?;
    let storage = terms
        .iter()
        .map(|t| layout_parts(cfg, t.b >> cfg.seg_exp, t.b & (cfg.parallelism() - 1)) as u64)
        .sum();
    let l = &r.ledger;
    Ok(SweepPoint {
        n: cfg.width,
        p: cfg.parallelism(),
        workload: workload.id.clone(),
        cycles: l.cycles(),
        e_c_pj: l.e_c(),
        e_r_pj: l.e_r(),
        e_a_pj: l.e_a(),
        opj: opj(l, workload.n_ops()).unwrap_or(0.0),
        edp: edp(l),
        storage_parts: storage,
    })
}

/// Latency should not grow with `P` at fixed `n`, and cycles should grow
/// with `n` at fixed `P`.
pub fn monotonicity(points: &[SweepPoint]) -> Vec<String> {
    let mut out = Vec::new();
    for a in points {
        for b in points {
            if a.workload != b.workload {
                continue;
            }
            if a.n == b.n && a.p < b.p && b.cycles > a.cycles {
                out.push(format!(
                    "latency rises with P at n={}: P={} {} cycles, P={} {} cycles",
                    a.n, a.p, a.cycles, b.p, b.cycles
                ));
            }
            if a.p == b.p && a.n < b.n && b.cycles <= a.cycles {
                out.push(format!(
                    "cycles do not grow with n at P={}: n={} {} cycles, n={} {} cycles",
                    a.p, a.n, a.cycles, b.n, b.cycles
                ));
            }
        }
    }
    out
}
