//! Operand traces, synthetic operand distributions and baseline comparisons.

use std::io::Read;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mac::{MacConfig, MacEngine, Term};

/// One multiplication from a trace file: `a` becomes the SN, `b` the UN.
pub type TraceRecord = Term;

/// Named list of products evaluated as one accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub id: String,
    /// Width the operand values were drawn at.
    pub width: u32,
    pub terms: Vec<Term>,
}

impl Workload {
    pub fn new(id: impl Into<String>, width: u32, terms: Vec<Term>) -> Self {
        Workload { id: id.into(), width, terms }
    }

    /// Operands moved to another width by shifting (truncating when narrowing).
    pub fn rescaled(&self, width: u32) -> Vec<Term> {
        let f = |v: u32| {
            if width <= self.width {
                v >> (self.width - width)
            } else {
                v << (width - self.width)
            }
        };
        self.terms.iter().map(|t| Term { a: f(t.a), b: f(t.b), sign: t.sign }).collect()
    }

    /// Multiplications plus the additions that accumulate them.
    pub fn n_ops(&self) -> u64 {
        (2 * self.terms.len() as u64).saturating_sub(1)
    }
}

/// Reads `a,b[,sign]` records. Errors carry the 1-based file line.
pub fn load_trace(path: &Path, width: u32) -> Result<Vec<TraceRecord>> {
    let f = std::fs::File::open(path)?;
    parse_trace(f, width)
}

pub fn parse_trace(input: impl Read, width: u32) -> Result<Vec<TraceRecord>> {
    crate::codec::check_width(width)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::Input { line: 1, msg: e.to_string() })?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let signed = match cols.as_slice() {
        ["a", "b"] => false,
        ["a", "b", "sign"] => true,
        _ => {
            return Err(Error::Input {
                line: 1,
                msg: format!("expected header a,b[,sign], got {}", cols.join(",")),
            })
        }
    };
    let max = (1u64 << width) - 1;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Input { line, msg };
        let num = |i: usize, name: &str| -> Result<u64> {
            let s = rec.get(i).ok_or_else(|| bad(format!("missing {name}")))?;
            let v: u64 = s.parse().map_err(|_| bad(format!("{name} '{s}' is not a number")))?;
            if v > max {
                return Err(bad(format!("{name} {v} exceeds {max} for width {width}")));
            }
            Ok(v)
        };
        let a = num(0, "a")? as u32;
        let b = num(1, "b")? as u32;
        let sign = if signed {
            match rec.get(2) {
                Some("1") | Some("+1") => 1,
                Some("-1") => -1,
                other => return Err(bad(format!("sign {:?} is not +1 or -1", other.unwrap_or("")))),
            }
        } else {
            1
        };
        out.push(Term { a, b, sign });
    }
    Ok(out)
}

pub fn write_trace(terms: &[TraceRecord], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["a", "b", "sign"]).map_err(|e| Error::Io(e.to_string()))?;
    for t in terms {
        w.write_record([t.a.to_string(), t.b.to_string(), t.sign.to_string()])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// How the second operand is drawn once the smaller one is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// Larger operand uniform in `[b, 2^n - 1]`; the smaller one is the UN.
    UniformAtLeast,
    /// Both operands drawn independently from the histogram.
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub width: u32,
    /// Probability of each value `0..2^n` for the smaller operand.
    pub weights: Vec<f64>,
    pub pairing: Pairing,
}

impl DistributionSpec {
    pub fn new(width: u32, weights: Vec<f64>, pairing: Pairing) -> Result<Self> {
        let spec = DistributionSpec { width, weights, pairing };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        crate::codec::check_width(self.width)?;
        if self.weights.len() != 1 << self.width {
            return Err(Error::Data(format!(
                "histogram has {} bins, width {} needs {}",
                self.weights.len(),
                self.width,
                1u32 << self.width
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Data("histogram weights must be finite and non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("histogram sums to {sum}, not 1")));
        }
        Ok(())
    }

    /// Small operands dominate: at 8 bits the smaller operand is nonzero,
    /// falls off linearly over `1..=63`, and 0.5% of the mass is spread over
    /// `64..=255`. Other widths shift the 8-bit histogram.
    pub fn network(width: u32) -> Result<Self> {
        crate::codec::check_width(width)?;
        let mut w8 = vec![0.0; 256];
        let head: f64 = (1..64).map(|v| (96 - v) as f64).sum();
        for (v, w) in w8.iter_mut().enumerate().take(64).skip(1) {
            *w = 0.995 * (96 - v) as f64 / head;
        }
        for w in &mut w8[64..] {
            *w = 0.005 / 192.0;
        }
        let mut weights = vec![0.0; 1 << width];
        for (v, w) in w8.iter().enumerate() {
            let t = if width <= 8 { v >> (8 - width) } else { v << (width - 8) };
            weights[t] += w;
        }
        normalize(&mut weights);
        Self::new(width, weights, Pairing::UniformAtLeast)
    }

    pub fn uniform(width: u32) -> Result<Self> {
        crate::codec::check_width(width)?;
        let n = 1usize << width;
        Self::new(width, vec![1.0 / n as f64; n], Pairing::Independent)
    }

    /// `value,weight` CSV; weights are normalised.
    pub fn from_histogram_csv(input: impl Read, width: u32) -> Result<Self> {
        crate::codec::check_width(width)?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut weights = vec![0.0; 1 << width];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |m: &str| Error::Input { line, msg: m.to_string() };
            let v: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad value"))?;
            let w: f64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad weight"))?;
            if v >= weights.len() || !(w.is_finite() && w >= 0.0) {
                return Err(bad("value out of range or negative weight"));
            }
            weights[v] += w;
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Data("histogram is empty".into()));
        }
        normalize(&mut weights);
        Self::new(width, weights, Pairing::Independent)
    }
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
}

/// Draws `count` products; identical `(spec, count, seed)` give identical output.
pub fn synth_workload(spec: &DistributionSpec, count: usize, seed: u64) -> Result<Vec<TraceRecord>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(&spec.weights).map_err(|e| Error::Data(e.to_string()))?;
    let max = (1u32 << spec.width) - 1;
    Ok((0..count)
        .map(|_| {
            let small = dist.sample(&mut rng) as u32;
            match spec.pairing {
                Pairing::UniformAtLeast => Term::new(rng.gen_range(small..=max), small),
                Pairing::Independent => Term::new(dist.sample(&mut rng) as u32, small),
            }
        })
        .collect())
}

/// Published figures for other racetrack PIM designs: cycles and pJ for one
/// multiplication, 2 multiplications + add, 5 multiplications + add.
pub const REFERENCE_DESIGNS: [(&str, [u64; 3], [f64; 3]); 3] = [
    ("coruscant", [64, 90, 90], [46.7, 107.4, 261.5]),
    ("spim", [149, 198, 328], [196.0, 420.0, 1101.6]),
    ("dw_nn", [163, 217, 357], [308.0, 656.0, 1709.6]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    /// False for echoed reference figures.
    pub simulated: bool,
    pub value: Option<i64>,
    pub cycles: u64,
    pub energy_pj: f64,
}

/// TR-assisted (both layouts) against the bit-serial APC baseline. For 8-bit
/// workloads of 1, 2 or 5 products the reference designs are echoed too.
pub fn compare_baselines(terms: &[Term], cfg: &MacConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    let mut plain = cfg.clone();
    plain.seed_compressed = false;
    let mut comp = cfg.clone();
    comp.seed_compressed = true;
    for (label, c) in [("tr_assisted", plain), ("tr_assisted_seed_compressed", comp)] {
        let r = MacEngine::new(c)?.dot_product(terms)?;
        rows.push(ReportRow {
            label: label.into(),
            simulated: true,
            value: Some(r.value),
            cycles: r.ledger.cycles(),
            energy_pj: r.ledger.energy_pj(),
        });
    }
    let apc = MacEngine::new(cfg.clone())?.baseline_apc_dot(terms)?;
    rows.push(ReportRow {
        label: "apc_baseline".into(),
        simulated: true,
        value: Some(apc.value),
        cycles: apc.ledger.cycles(),
        energy_pj: apc.ledger.energy_pj(),
    });
    let col = match terms.len() {
        1 => Some(0),
        2 => Some(1),
        5 => Some(2),
        _ => None,
    };
    if let (Some(k), 8) = (col, cfg.width) {
        for (name, cyc, en) in REFERENCE_DESIGNS {
            rows.push(ReportRow {
                label: format!("{name}_reference"),
                simulated: false,
                value: None,
                cycles: cyc[k],
                energy_pj: en[k],
            });
        }
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("label,simulated,value,cycles,energy_pj\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:.4}\n",
            r.label,
            r.simulated,
            r.value.map(|v| v.to_string()).unwrap_or_default(),
            r.cycles,
            r.energy_pj
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_examples() {
        let t = parse_trace("a,b\n45,200\n".as_bytes(), 8).unwrap();
        assert_eq!(t, vec![Term::new(45, 200)]);
        let s = parse_trace("a,b,sign\n3,7,-1\n".as_bytes(), 8).unwrap();
        assert_eq!(s, vec![Term::signed(3, 7, -1)]);
        let e = parse_trace("a,b\n300,1\n".as_bytes(), 8).unwrap_err();
        assert!(matches!(e, Error::Input { line: 2, .. }), "{e:?}");
        let e = parse_trace("a,b\n1,2\n1,x\n".as_bytes(), 8).unwrap_err();
        assert!(matches!(e, Error::Input { line: 3, .. }), "{e:?}");
        assert!(parse_trace("x,y\n1,2\n".as_bytes(), 8).is_err());
    }

    #[test]
    fn trace_roundtrip() {
        let terms = vec![Term::signed(1, 2, -1), Term::new(255, 0)];
        let mut buf = Vec::new();
        write_trace(&terms, &mut buf).unwrap();
        assert_eq!(parse_trace(buf.as_slice(), 8).unwrap(), terms);
    }

    #[test]
    fn network_mass_below_64() {
        let spec = DistributionSpec::network(8).unwrap();
        let head: f64 = spec.weights[..64].iter().sum();
        assert!(head >= 0.99);
        assert_eq!(spec.weights[0], 0.0);
        let w = synth_workload(&spec, 100_000, 1).unwrap();
        let small = w.iter().filter(|t| t.b <= 63).count() as f64 / w.len() as f64;
        assert!(small >= 0.99 - 3.0 * (0.99f64 * 0.01 / 1e5).sqrt());
        assert!(w.iter().all(|t| t.a >= t.b));
    }

    #[test]
    fn uniform_mean() {
        let spec = DistributionSpec::uniform(8).unwrap();
        let n = 20_000;
        let w = synth_workload(&spec, n, 7).unwrap();
        let mean = w.iter().map(|t| t.b as f64).sum::<f64>() / n as f64;
        let sigma = (((256f64 * 256.0) - 1.0) / 12.0 / n as f64).sqrt();
        assert!((mean - 127.5).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = DistributionSpec::network(8).unwrap();
        assert_eq!(synth_workload(&spec, 50, 3).unwrap(), synth_workload(&spec, 50, 3).unwrap());
        assert_ne!(synth_workload(&spec, 50, 3).unwrap(), synth_workload(&spec, 50, 4).unwrap());
        assert_eq!(synth_workload(&spec, 1, 0).unwrap().len(), 1);
        assert_eq!(synth_workload(&spec, 0, 0), Err(Error::Empty));
    }

    #[test]
    fn bad_histograms() {
        assert!(DistributionSpec::new(2, vec![0.5, 0.5], Pairing::Independent).is_err());
        assert!(DistributionSpec::new(1, vec![0.5, 0.4], Pairing::Independent).is_err());
        let h = DistributionSpec::from_histogram_csv("value,weight\n1,2\n3,2\n".as_bytes(), 2)
            .unwrap();
        assert_eq!(h.weights, vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn network_narrow_widths() {
        for n in 4..=10 {
            DistributionSpec::network(n).unwrap();
        }
    }

    #[test]
    fn comparison_rows() {
        let cfg = MacConfig::new(8, 64).unwrap();
        let rows = compare_baselines(&[Term::new(255, 255)], &cfg).unwrap();
        assert_eq!(rows[0].cycles, 32);
        assert!(rows[2].cycles > rows[0].cycles);
        assert_eq!(rows.len(), 6);
        assert!(rows[3..].iter().all(|r| !r.simulated));
        assert_eq!(rows[3].cycles, 64);
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("label,simulated,value,cycles,energy_pj\n"));
    }

    #[test]
    fn rescale() {
        let w = Workload::new("x", 8, vec![Term::new(255, 64)]);
        assert_eq!(w.rescaled(6), vec![Term::new(63, 16)]);
        assert_eq!(w.rescaled(8), w.terms);
        assert_eq!(w.n_ops(), 1);
    }
}
