//! TR-assisted multiply and dot-product pipeline.
//!
//! Operand `a` is stored compressed (seed + binary low bits) and `b` is
//! consumed as `(counter, bedge)`. The output logic emits `counter` full
//! segments and one mixed segment, which are written transposed into part
//! columns (one track per segment bit), drained by ping-pong transverse reads
//! and reduced by the tree adder.
//!
//! Accounting per round, phases in sequence:
//!
//! ```text
//! output    max(longest term, segments / units) * output_cycles_per_segment
//! write     valid_per_part lockstep commands, each shifts_per_write shifts + 1 write
//! tr        one tr_cycles wave per part parity present
//! tree      tree_adder_latency + accumulate per extra batch of tree_adder_inputs
//! ```
//!
//! DBCs run side by side, so per-round lane ledgers are combined with
//! [`CostLedger::parallel`].

use std::collections::BTreeMap;

use crate::bits::BitSeq;
use crate::codec::{encode_sn, encode_un, BinaryOperand};
use crate::error::{Error, Result};
use crate::ledger::{Category, CostLedger};
use crate::pfc::{check_seg_exp, compress, make_quadruple, Quadruple};
use crate::rtm::{Cell, RtmConfig, RtmDbc};

/// Output-logic power in mW for each segment parallelism.
pub const OUTPUT_POWER_MW: [(u32, f64); 5] =
    [(4, 0.1249), (8, 0.1108), (16, 0.0972), (32, 0.0848), (64, 0.0702)];

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    pub width: u32,
    /// `log2` of the segment length `P`.
    pub seg_exp: u32,
    pub seed_compressed: bool,
    pub signed: bool,
    /// Overlap segment generation with writing after the first segment.
    pub pipelined: bool,
    pub output_cycles_per_segment: u64,
    /// Overrides the per-parallelism power table.
    pub output_power_mw: Option<f64>,
    pub clock_ns: f64,
    pub tree_adder_latency_cycles: u64,
    /// Inputs the tree adder reduces in one pass.
    pub tree_adder_inputs: usize,
    /// Extra cycles for each further pass and for accumulating across rounds.
    pub accumulate_adder_cycles: u64,
    pub signed_adder_cycles: u64,
    pub adder_energy_pj: f64,
    /// Output-logic instances working concurrently.
    pub output_units: usize,
    pub dbcs: usize,
    pub rtm: RtmConfig,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            width: 8,
            seg_exp: 6,
            seed_compressed: false,
            signed: false,
            pipelined: false,
            output_cycles_per_segment: 1,
            output_power_mw: None,
            clock_ns: 1.0,
            tree_adder_latency_cycles: 3,
            tree_adder_inputs: 128,
            accumulate_adder_cycles: 2,
            signed_adder_cycles: 1,
            adder_energy_pj: 0.4892,
            output_units: 32,
            dbcs: 8,
            rtm: RtmConfig::default(),
        }
    }
}

impl MacConfig {
    pub fn new(width: u32, parallelism: u32) -> Result<Self> {
        let cfg = MacConfig { width, seg_exp: parallelism_exp(parallelism)?, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Bit-level profile: free shifts, single-cycle writes and reads. Used for
    /// small illustrative dot products where alignment is not modeled.
    pub fn unit_op(width: u32, parallelism: u32) -> Result<Self> {
        let mut cfg = Self::new(width, parallelism)?;
        cfg.rtm.shift_cycles = 0;
        cfg.rtm.write_cycles = 1;
        cfg.rtm.read_cycles = 1;
        Ok(cfg)
    }

    pub fn parallelism(&self) -> u32 {
        1 << self.seg_exp
    }

    /// Upper bound on emitted segments: `2^n / P`.
    pub fn max_segments(&self) -> u32 {
        1 << (self.width - self.seg_exp)
    }

    pub fn output_power(&self) -> Result<f64> {
        if let Some(p) = self.output_power_mw {
            return Ok(p);
        }
        let p = self.parallelism();
        OUTPUT_POWER_MW
            .iter()
            .find(|(q, _)| *q == p)
            .map(|&(_, w)| w)
            .ok_or(Error::BadParallelism(p))
    }

    pub fn validate(&self) -> Result<()> {
        check_seg_exp(self.width, self.seg_exp)?;
        self.output_power()?;
        self.rtm.validate()?;
        if self.output_units == 0 || self.dbcs == 0 || self.tree_adder_inputs < 2 {
            return Err(Error::Config(
                "output_units and dbcs must be positive, tree_adder_inputs at least 2".into(),
            ));
        }
        if self.signed && self.rtm.parts_per_track < 2 {
            return Err(Error::Config("signed mode needs at least two parts per track".into()));
        }
        for (k, v) in [
            ("clock_ns", self.clock_ns),
            ("adder_energy_pj", self.adder_energy_pj),
            ("output_power_mw", self.output_power_mw.unwrap_or(0.0)),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{k} must be a finite non-negative number")));
            }
        }
        Ok(())
    }

    fn operand(&self, v: u32) -> Result<BinaryOperand> {
        BinaryOperand::new(v, self.width)
    }

    fn valid(&self) -> usize {
        self.rtm.valid_per_part
    }

    fn write_command_cycles(&self) -> u64 {
        self.rtm.shifts_per_write * self.rtm.shift_cycles + self.rtm.write_cycles
    }

    /// Tree-adder latency for `inputs` values.
    pub fn tree_cycles(&self, inputs: usize) -> u64 {
        if inputs <= 1 {
            return 0;
        }
        let passes = inputs.div_ceil(self.tree_adder_inputs) as u64;
        self.tree_adder_latency_cycles + (passes - 1) * self.accumulate_adder_cycles
    }

    /// Output-logic cycles charged given the write phase it may hide behind.
    fn output_charge(&self, out: u64, write: u64) -> u64 {
        if self.pipelined && out > 0 {
            let first = self.output_cycles_per_segment.min(out);
            first + (out - first).saturating_sub(write)
        } else {
            out
        }
    }

    /// Parts used by each sign half: all parts unsigned, lower/upper half signed.
    fn half_parts(&self) -> [std::ops::Range<usize>; 2] {
        let n = self.rtm.parts_per_track;
        if self.signed {
            [0..n / 2, n / 2..n]
        } else {
            [0..n, 0..0]
        }
    }

    fn uncompressed_single_cycles(&self, q: &Quadruple) -> Option<u64> {
        let segs = q.segments() as usize;
        if segs == 0 {
            return Some(0);
        }
        let valid = self.valid();
        let columns = segs.div_ceil(valid);
        let half = self.half_parts()[0].len();
        if columns > self.dbcs * half {
            return None;
        }
        let out = (segs as u64 + u64::from(q.bedge == 0)) * self.output_cycles_per_segment;
        let write = valid as u64 * self.write_command_cycles();
        let waves = if columns > self.dbcs * half.div_ceil(2) { 2 } else { 1 };
        let tree = self.tree_cycles(columns * self.parallelism() as usize);
        Some(self.output_charge(out, write) + write + waves * self.rtm.tr_cycles + tree)
    }

    fn compressed_single_cycles(&self, q: &Quadruple) -> Option<u64> {
        let g = seed_groups(self, q);
        if g.is_empty() {
            return Some(0);
        }
        let half = self.half_parts()[0].len();
        let slots = self.dbcs * self.parallelism() as usize;
        if g.len() > slots * half {
            return None;
        }
        let valid = self.valid();
        let out = valid as u64 * self.output_cycles_per_segment;
        let write = valid as u64 * self.write_command_cycles();
        let waves = if g.len() > slots * half.div_ceil(2) { 2 } else { 1 };
        let inputs: u64 = g.iter().map(|x| x.mult).sum();
        let tree = self.tree_cycles(inputs as usize);
        Some(self.output_charge(out, write) + write + waves * self.rtm.tr_cycles + tree)
    }

    /// True when the seed-compressed layout takes more cycles than the plain
    /// layout for this single multiplication.
    pub fn compressed_is_slower(&self, q: &Quadruple) -> bool {
        match (self.compressed_single_cycles(q), self.uncompressed_single_cycles(q)) {
            (Some(c), Some(u)) => c > u,
            _ => false,
        }
    }
}

fn parallelism_exp(p: u32) -> Result<u32> {
    if p >= 2 && p.is_power_of_two() {
        Ok(p.trailing_zeros())
    } else {
        Err(Error::BadParallelism(p))
    }
}

/// One term of a dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Term {
    pub a: u32,
    pub b: u32,
    /// `1` or `-1`.
    pub sign: i8,
}

impl Term {
    pub fn new(a: u32, b: u32) -> Self {
        Term { a, b, sign: 1 }
    }

    pub fn signed(a: u32, b: u32, sign: i8) -> Self {
        Term { a, b, sign }
    }

    fn half(&self) -> usize {
        usize::from(self.sign < 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacResult {
    /// Ones in the product sequence.
    pub count: u64,
    /// `count / 2^n`.
    pub scaled_value: f64,
    pub ledger: CostLedger,
    pub segments_emitted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DotResult {
    /// Positive-half sum minus negative-half sum.
    pub value: i64,
    pub positive: u64,
    pub negative: u64,
    pub ledger: CostLedger,
    pub segments_emitted: u64,
    pub rounds: u64,
}

/// A horizontal run of at most `valid_per_part` bits for one part of one
/// track, with the number of tree-adder inputs its TR count is routed to.
#[derive(Debug, Clone)]
struct Group {
    term: usize,
    mult: u64,
    bits: Vec<bool>,
}

fn chunks(bits: impl Iterator<Item = bool>, valid: usize, term: usize, mult: u64) -> Vec<Group> {
    let all: Vec<bool> = bits.collect();
    all.chunks(valid).map(|c| Group { term, mult, bits: c.to_vec() }).collect()
}

/// Seed, LSB-stream and AND-segment groups for one multiplication.
fn seed_groups(cfg: &MacConfig, q: &Quadruple) -> Vec<Group> {
    let valid = cfg.valid();
    let mut out = Vec::new();
    if q.counter > 0 {
        out.extend(chunks(q.seed.iter(), valid, 0, q.counter as u64));
        let code = q.code();
        let lsbs = (0..q.counter as usize).map(|m| {
            crate::pfc::lsb_bit(&code, m).expect("counter is below the segment count")
        });
        out.extend(chunks(lsbs, valid, 0, 1));
    }
    if q.bedge > 0 {
        let mixed = q.mixed_segment();
        out.extend(chunks(mixed.iter().take(mixed.len() - 1), valid, 0, 1));
    }
    out
}

fn drain_column(dbc: &mut RtmDbc, part: usize) -> Result<u64> {
    let counts = dbc.tr_parts(&[part])?;
    dbc.clear_parts(&[part]);
    Ok(counts[0].iter().map(|&c| c as u64).sum())
}

/// Sum of `counts` through the tree adder, charging its latency and one
/// addition per input beyond the first.
pub fn tree_add(counts: &[u64], cfg: &MacConfig) -> (u64, CostLedger) {
    let mut l = CostLedger::new();
    if counts.len() > 1 {
        let adds = counts.len() as u64 - 1;
        l.charge(
            Category::Adder,
            adds,
            cfg.tree_cycles(counts.len()),
            adds as f64 * cfg.adder_energy_pj,
        );
    }
    (counts.iter().sum(), l)
}

/// Columns of one sign half in fill order: even parts of every DBC, then
/// odd parts, so small workloads need a single TR wave.
fn columns(cfg: &MacConfig, half: usize) -> Vec<(usize, usize)> {
    let range = cfg.half_parts()[half].clone();
    let mut cols = Vec::new();
    for parity in 0..2 {
        for d in 0..cfg.dbcs {
            cols.extend(range.clone().filter(|p| p % 2 == parity).map(|p| (d, p)));
        }
    }
    cols
}

pub struct MacEngine {
    cfg: MacConfig,
    lanes: Vec<Option<RtmDbc>>,
    zero: BitSeq,
    columns: [Vec<(usize, usize)>; 2],
}

impl MacEngine {
    pub fn new(cfg: MacConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(MacEngine {
            lanes: (0..cfg.dbcs).map(|_| None).collect(),
            zero: BitSeq::zeros(cfg.parallelism() as usize),
            columns: [columns(&cfg, 0), columns(&cfg, 1)],
            cfg,
        })
    }

    pub fn config(&self) -> &MacConfig {
        &self.cfg
    }

    fn lane(&mut self, d: usize) -> Result<&mut RtmDbc> {
        if self.lanes[d].is_none() {
            let tracks = self.cfg.parallelism() as usize;
            self.lanes[d] = Some(RtmDbc::new(self.cfg.rtm.clone(), tracks)?);
        }
        Ok(self.lanes[d].as_mut().expect("lane initialised above"))
    }

    fn quadruples(&self, terms: &[Term]) -> Result<Vec<Quadruple>> {
        if terms.is_empty() {
            return Err(Error::Empty);
        }
        terms
            .iter()
            .map(|t| {
                if t.sign != 1 && t.sign != -1 {
                    return Err(Error::Data(format!("sign {} is not +1 or -1", t.sign)));
                }
                if t.sign < 0 && !self.cfg.signed {
                    return Err(Error::SignedDisabled);
                }
                let a = self.cfg.operand(t.a)?;
                let b = self.cfg.operand(t.b)?;
                make_quadruple(&compress(a, self.cfg.seg_exp)?, b)
            })
            .collect()
    }

    /// Plain layout multiplication.
    pub fn multiply(&mut self, a: BinaryOperand, b: BinaryOperand) -> Result<MacResult> {
        self.single(a, b, false)
    }

    /// Seed-compressed layout multiplication.
    pub fn multiply_seed_compressed(
        &mut self,
        a: BinaryOperand,
        b: BinaryOperand,
    ) -> Result<MacResult> {
        self.single(a, b, true)
    }

    fn single(&mut self, a: BinaryOperand, b: BinaryOperand, compressed: bool) -> Result<MacResult> {
        for w in [a.width(), b.width()] {
            if w != self.cfg.width {
                return Err(Error::WidthMismatch(w, self.cfg.width));
            }
        }
        let terms = [Term::new(a.value(), b.value())];
        let r = if compressed { self.run_compressed(&terms)? } else { self.run_plain(&terms)? };
        Ok(MacResult {
            count: r.positive,
            scaled_value: r.positive as f64 / (1u64 << self.cfg.width) as f64,
            ledger: r.ledger,
            segments_emitted: r.segments_emitted,
        })
    }

    /// Dot product using the configured layout.
    pub fn dot_product(&mut self, terms: &[Term]) -> Result<DotResult> {
        if self.cfg.seed_compressed {
            self.run_compressed(terms)
        } else {
            self.run_plain(terms)
        }
    }


    fn run_plain(&mut self, terms: &[Term]) -> Result<DotResult> {
        let quads = self.quadruples(terms)?;
        let valid = self.cfg.valid();
        let halves = if self.cfg.signed { 2 } else { 1 };

        // Fill columns in order; chunk into rounds of the available columns.
        let mut rounds: Vec<[Vec<Vec<(usize, BitSeq)>>; 2]> = Vec::new();
        let mut segments_emitted = 0u64;
        let mut last_round = vec![0usize; quads.len()];
        for h in 0..halves {
            let ncols = self.columns[h].len();
            let mut fills: Vec<Vec<(usize, BitSeq)>> = Vec::new();
            for (i, q) in quads.iter().enumerate() {
                if terms[i].half() != h {
                    continue;
                }
                for seg in q.emit() {
                    segments_emitted += 1;
                    match fills.last_mut() {
                        Some(col) if col.len() < valid => col.push((i, seg)),
                        _ => fills.push(vec![(i, seg)]),
                    }
                }
            }
            for (k, col) in fills.iter().enumerate() {
                for (i, _) in col {
                    last_round[*i] = k / ncols;
                }
            }
            for (r, chunk) in fills.chunks(ncols).enumerate() {
                if rounds.len() <= r {
                    rounds.push([Vec::new(), Vec::new()]);
                }
                rounds[r][h] = chunk.to_vec();
            }
        }

        let mut total = CostLedger::new();
        let mut sums = [0u64; 2];
        for (r, round) in rounds.iter().enumerate() {
            let done = |i: usize| last_round[i] == r && quads[i].bedge == 0;
            let (counts, ledger) = self.plain_round(round, done)?;
            total.merge(&ledger);
            sums[0] += counts[0];
            sums[1] += counts[1];
            if r > 0 {
                total.merge(&self.accumulate_ledger(round.iter().filter(|h| !h.is_empty()).count()));
            }
        }
        self.finish(sums, total, segments_emitted, rounds.len() as u64)
    }

    /// Adds a round's partial sum to the running total of each active half.
    fn accumulate_ledger(&self, active: usize) -> CostLedger {
        let mut l = CostLedger::new();
        l.charge(
            Category::Adder,
            active as u64,
            self.cfg.accumulate_adder_cycles,
            active as f64 * self.cfg.adder_energy_pj,
        );
        l
    }

    fn finish(
        &self,
        sums: [u64; 2],
        mut ledger: CostLedger,
        segments_emitted: u64,
        rounds: u64,
    ) -> Result<DotResult> {
        if self.cfg.signed && rounds > 0 {
            ledger.charge(
                Category::Adder,
                1,
                self.cfg.signed_adder_cycles,
                self.cfg.adder_energy_pj,
            );
        }
        Ok(DotResult {
            value: sums[0] as i64 - sums[1] as i64,
            positive: sums[0],
            negative: sums[1],
            ledger,
            segments_emitted,
            rounds,
        })
    }

    fn output_ledger(&self, out_cycles: u64, segments: u64, write_cycles: u64) -> Result<CostLedger> {
        let mut l = CostLedger::new();
        let charged = self.cfg.output_charge(out_cycles, write_cycles);
        l.charge(
            Category::OutputLogic,
            segments,
            charged,
            out_cycles as f64 * self.cfg.output_power()? * self.cfg.clock_ns,
        );
        Ok(l)
    }

    fn tree_ledger(&self, inputs: [u64; 2]) -> CostLedger {
        let mut l = CostLedger::new();
        let cycles = inputs.iter().map(|&i| self.cfg.tree_cycles(i as usize)).max().unwrap_or(0);
        let adds: u64 = inputs.iter().map(|&i| i.saturating_sub(1)).sum();
        if adds > 0 || cycles > 0 {
            l.charge(Category::Adder, adds, cycles, adds as f64 * self.cfg.adder_energy_pj);
        }
        l
    }

    fn plain_round(
        &mut self,
        round: &[Vec<Vec<(usize, BitSeq)>>; 2],
        done: impl Fn(usize) -> bool,
    ) -> Result<([u64; 2], CostLedger)> {
        let valid = self.cfg.valid();
        let p = self.cfg.parallelism() as u64;

        let mut per_term: BTreeMap<usize, u64> = BTreeMap::new();
        let mut segs = 0u64;
        for (i, _) in round.iter().flatten().flatten() {
            *per_term.entry(*i).or_default() += 1;
            segs += 1;
        }
        // A term without a mixed segment spends one more cycle detecting that
        // the accumulator reached the counter.
        let longest =
            per_term.iter().map(|(&i, &n)| n + u64::from(done(i))).max().unwrap_or(0);
        let out_cycles = longest.max(segs.div_ceil(self.cfg.output_units as u64))
            * self.cfg.output_cycles_per_segment;

        // Per-DBC lanes: lockstep writes then ping-pong TR.
        let mut by_lane: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
        for h in 0..2 {
            for (k, _) in round[h].iter().enumerate() {
                let (d, part) = self.columns[h][k];
                by_lane.entry(d).or_default().push((part, h, k));
            }
        }
        let mut lane_ledgers = Vec::with_capacity(by_lane.len());
        let mut counts = [0u64; 2];
        let mut inputs = [0u64; 2];
        let zero = self.zero.clone();
        for (&d, entries) in &by_lane {
            let dbc = self.lane(d)?;
            for q in 0..valid {
                let cmd: Vec<(usize, &BitSeq)> = entries
                    .iter()
                    .map(|&(part, h, k)| {
                        (part, round[h][k].get(q).map(|(_, s)| s).unwrap_or(&zero))
                    })
                    .collect();
                dbc.write_columns(&cmd)?;
            }
            let parts: Vec<usize> = entries.iter().map(|e| e.0).collect();
            let tr = dbc.tr_parts(&parts)?;
            for (e, c) in entries.iter().zip(&tr) {
                counts[e.1] += c.iter().map(|&x| x as u64).sum::<u64>();
                inputs[e.1] += p;
            }
            dbc.clear_parts(&parts);
            lane_ledgers.push(dbc.take_ledger());
        }
        let mut ledger = CostLedger::parallel(&lane_ledgers);
        let write_cycles = ledger[Category::Shift].cycles + ledger[Category::Write].cycles;
        ledger.merge(&self.output_ledger(out_cycles, segs, write_cycles)?);
        ledger.merge(&self.tree_ledger(inputs));
        Ok((counts, ledger))
    }

    fn run_compressed(&mut self, terms: &[Term]) -> Result<DotResult> {
        let quads = self.quadruples(terms)?;
        let valid = self.cfg.valid();
        let halves = if self.cfg.signed { 2 } else { 1 };
        let tracks = self.cfg.parallelism() as usize;

        let mut slow = 0u64;
        let mut segments_emitted = 0u64;
        let mut rounds: Vec<[Vec<Group>; 2]> = Vec::new();
        for h in 0..halves {
            let range = self.cfg.half_parts()[h].clone();
            let per_round = self.cfg.dbcs * tracks * range.len();
            let mut groups = Vec::new();
            for (i, q) in quads.iter().enumerate() {
                if terms[i].half() != h {
                    continue;
                }
                segments_emitted += q.segments() as u64;
                if self.cfg.compressed_is_slower(q) {
                    slow += 1;
                }
                groups.extend(seed_groups(&self.cfg, q).into_iter().map(|g| Group { term: i, ..g }));
            }
            for (r, chunk) in groups.chunks(per_round).enumerate() {
                if rounds.len() <= r {
                    rounds.push([Vec::new(), Vec::new()]);
                }
                rounds[r][h] = chunk.to_vec();
            }
        }

        let mut total = CostLedger::new();
        let mut sums = [0u64; 2];
        for (r, round) in rounds.iter().enumerate() {
            let mut lanes: BTreeMap<usize, Vec<(Cell, usize, usize)>> = BTreeMap::new();
            let mut terms_here = std::collections::BTreeSet::new();
            for h in 0..2 {
                for (k, g) in round[h].iter().enumerate() {
                    let (d, track, part) = self.compressed_slot(h, k);
                    terms_here.insert(g.term);
                    lanes.entry(d).or_default().push((Cell { track, part, bit: false }, h, k));
                }
            }
            let mut lane_ledgers = Vec::new();
            let mut inputs = [0u64; 2];
            for (&d, cells) in &lanes {
                let dbc = self.lane(d)?;
                for q in 0..valid {
                    let cmd: Vec<Cell> = cells
                        .iter()
                        .map(|&(c, h, k)| Cell {
                            bit: round[h][k].bits.get(q).copied().unwrap_or(false),
                            ..c
                        })
                        .collect();
                    dbc.write_cells(&cmd)?;
                }
                for parity in 0..2 {
                    let wave: Vec<&(Cell, usize, usize)> =
                        cells.iter().filter(|(c, _, _)| c.part % 2 == parity).collect();
                    if wave.is_empty() {
                        continue;
                    }
                    let at: Vec<(usize, usize)> =
                        wave.iter().map(|(c, _, _)| (c.track, c.part)).collect();
                    let counts = dbc.tr_wave(&at)?;
                    for (&&(_, h, k), v) in wave.iter().zip(counts) {
                        let m = round[h][k].mult;
                        sums[h] += v as u64 * m;
                        inputs[h] += m;
                    }
                }
                for (c, _, _) in cells {
                    dbc.clear_parts_on_track(c.track, &[c.part]);
                }
                lane_ledgers.push(dbc.take_ledger());
            }
            let mut ledger = CostLedger::parallel(&lane_ledgers);
            let write_cycles = ledger[Category::Shift].cycles + ledger[Category::Write].cycles;
            let batches = (terms_here.len() as u64).div_ceil(self.cfg.output_units as u64);
            let out_cycles = batches * valid as u64 * self.cfg.output_cycles_per_segment;
            let segs: u64 = terms_here.iter().map(|&i| quads[i].segments() as u64).sum();
            ledger.merge(&self.output_ledger(out_cycles, segs, write_cycles)?);
            ledger.merge(&self.tree_ledger(inputs));
            if r > 0 {
                ledger.merge(&self.accumulate_ledger(round.iter().filter(|g| !g.is_empty()).count()));
            }
            total.merge(&ledger);
        }
        total.slow_compressed += slow;
        self.finish(sums, total, segments_emitted, rounds.len() as u64)
    }

    /// Slot `k` of one sign half in horizontal fill order: even parts of
    /// every track of every DBC first, then odd parts.
    fn compressed_slot(&self, half: usize, k: usize) -> (usize, usize, usize) {
        let range = self.cfg.half_parts()[half].clone();
        let tracks = self.cfg.parallelism() as usize;
        let first_even = range.start + range.start % 2;
        let evens = (first_even..range.end).step_by(2).count();
        let (parity_start, per, k) = if k < evens * tracks * self.cfg.dbcs {
            (first_even, evens, k)
        } else {
            let first_odd = range.start + 1 - range.start % 2;
            (first_odd, range.len() - evens, k - evens * tracks * self.cfg.dbcs)
        };
        let block = k / per;
        (block / tracks, block % tracks, parity_start + 2 * (k % per))
    }

    /// Throughput-oriented execution of a long stream of products. Each
    /// output unit owns a lane of `P` tracks and writes every segment with its
    /// own command into the lane's current column. A full column is drained
    /// by TR and the tree adder while the next column is written, so the
    /// steady state is bound by segment generation and writing.
    pub fn stream(&mut self, terms: &[Term]) -> Result<DotResult> {
        let quads = self.quadruples(terms)?;
        let cfg = self.cfg.clone();
        let valid = cfg.valid();
        let p = cfg.parallelism() as usize;
        let ocps = cfg.output_cycles_per_segment;
        let wc = cfg.write_command_cycles();
        let drain = cfg.rtm.tr_cycles + cfg.tree_cycles(p);
        let stall = drain.saturating_sub(valid as u64 * wc);

        // Greedy least-loaded assignment of products to units.
        let units = cfg.output_units;
        let mut load = vec![0u64; units];
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); units];
        for (i, q) in quads.iter().enumerate() {
            if q.segments() == 0 {
                continue;
            }
            let u = (0..units).min_by_key(|&u| (load[u], u)).expect("units > 0");
            load[u] += q.segments() as u64;
            assigned[u].push(i);
        }

        let mut sums = [0u64; 2];
        let mut ledger = CostLedger::new();
        let mut critical = (0u64, [0u64; 6]);
        let mut columns_total = 0u64;
        let mut segments_emitted = 0u64;
        let mut used = 0usize;
        for list in assigned.iter().filter(|l| !l.is_empty()) {
            used += 1;
            let mut dbc = RtmDbc::new(cfg.rtm.clone(), p)?;
            let ranges = cfg.half_parts();
            let mut cur = [ranges[0].start, ranges[1].start];
            let mut fill = [0usize; 2];
            let mut columns = 0u64;
            let (mut segs, mut done) = (0u64, 0u64);
            for &i in list {
                let h = terms[i].half();
                for seg in quads[i].emit() {
                    dbc.write_transposed(cur[h], &seg)?;
                    segs += 1;
                    fill[h] += 1;
                    if fill[h] == valid {
                        sums[h] += drain_column(&mut dbc, cur[h])?;
                        columns += 1;
                        fill[h] = 0;
                        cur[h] = if cur[h] + 1 < ranges[h].end { cur[h] + 1 } else { ranges[h].start };
                    }
                }
                done += u64::from(quads[i].bedge == 0);
            }
            let mut pads = 0u64;
            for h in 0..2 {
                if fill[h] > 0 {
                    pads += (valid - fill[h]) as u64;
                    dbc.pad_parts(&[cur[h]])?;
                    sums[h] += drain_column(&mut dbc, cur[h])?;
                    columns += 1;
                }
            }
            segments_emitted += segs;
            columns_total += columns;
            ledger.merge(&dbc.take_ledger());

            let out = (segs + done) * ocps;
            let write = (segs + pads) * wc;
            let shift_share = cfg.rtm.shifts_per_write * cfg.rtm.shift_cycles * (segs + pads);
            let first = ocps.min(out);
            let out_exposed = first + out.saturating_sub(write).saturating_sub(first);
            let tr = cfg.rtm.tr_cycles + columns.saturating_sub(1) * stall;
            let tree = cfg.tree_cycles(p);
            let total = out_exposed + write + tr + tree;
            if total > critical.0 {
                critical = (total, [shift_share, write - shift_share, tr, 0, out_exposed, tree]);
            }
        }

        // Ops and energy come from the devices; latency is the critical lane.
        for (k, c) in Category::ALL.iter().enumerate() {
            ledger[*c].cycles = critical.1[k];
        }
        let out_cycles: u64 = quads
            .iter()
            .filter(|q| q.segments() > 0)
            .map(|q| (q.segments() as u64 + u64::from(q.bedge == 0)) * ocps)
            .sum();
        ledger.charge(
            Category::OutputLogic,
            segments_emitted,
            0,
            out_cycles as f64 * cfg.output_power()? * cfg.clock_ns,
        );
        // Per-column tree, running per-lane sums, then the cross-lane tree.
        let adds = columns_total * (p as u64 - 1) + columns_total.saturating_sub(used as u64)
            + (used as u64).saturating_sub(1);
        ledger.charge(
            Category::Adder,
            adds,
            cfg.tree_cycles(used),
            adds as f64 * cfg.adder_energy_pj,
        );
        self.finish(sums, ledger, segments_emitted, u64::from(used > 0))
    }

    /// Bit-serial APC reference: scans the full product sequence of every
    /// term, one shift and one read per bit.
    pub fn baseline_apc_dot(&self, terms: &[Term]) -> Result<DotResult> {
        let _ = self.quadruples(terms)?;
        let cfg = &self.cfg;
        let len = 1u64 << cfg.width;
        let mut sums = [0u64; 2];
        for t in terms {
            let sn = encode_sn(cfg.operand(t.a)?);
            let un = encode_un(cfg.operand(t.b)?);
            let prod = sn.bits.and(&un.bits);
            sums[t.half()] += prod.iter().filter(|&b| b).count() as u64;
        }
        let k = terms.len() as u64;
        let batches = k.div_ceil(cfg.output_units as u64);
        let bits = k * len;
        let mut l = CostLedger::new();
        l.charge(
            Category::Shift,
            bits,
            batches * len * cfg.rtm.shift_cycles,
            bits as f64 * cfg.rtm.shift_energy_pj,
        );
        l.charge(
            Category::Read,
            bits,
            batches * len * cfg.rtm.read_cycles,
            bits as f64 * cfg.rtm.read_energy_pj,
        );
        // Counter increments plus the final reduction.
        let adds = bits + k.saturating_sub(1);
        l.charge(
            Category::Adder,
            adds,
            cfg.tree_cycles(terms.len()),
            adds as f64 * cfg.adder_energy_pj,
        );
        let mut r = self.finish(sums, l, 0, 1)?;
        r.rounds = batches;
        Ok(r)
    }

    pub fn baseline_apc_multiply(&self, a: BinaryOperand, b: BinaryOperand) -> Result<MacResult> {
        for w in [a.width(), b.width()] {
            if w != self.cfg.width {
                return Err(Error::WidthMismatch(w, self.cfg.width));
            }
        }
        let r = self.baseline_apc_dot(&[Term::new(a.value(), b.value())])?;
        Ok(MacResult {
            count: r.positive,
            scaled_value: r.positive as f64 / (1u64 << self.cfg.width) as f64,
            ledger: r.ledger,
            segments_emitted: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::mul_reference;

    fn op(v: u32, n: u32) -> BinaryOperand {
        BinaryOperand::new(v, n).unwrap()
    }

    fn engine(n: u32, p: u32) -> MacEngine {
        MacEngine::new(MacConfig::new(n, p).unwrap()).unwrap()
    }

    #[test]
    fn worst_case_single_multiply() {
        let mut e = engine(8, 64);
        let r = e.multiply(op(255, 8), op(255, 8)).unwrap();
        assert_eq!(r.count, 255);
        assert_eq!(r.segments_emitted, 4);
        assert_eq!(r.ledger.cycles(), 32);
        assert!((r.ledger.energy_pj() - 44.3).abs() < 0.05, "{}", r.ledger.energy_pj());
        assert_eq!(r.ledger[Category::OutputLogic].cycles, 4);
        assert_eq!(r.ledger[Category::Write].cycles + r.ledger[Category::Shift].cycles, 20);
        assert_eq!(r.ledger[Category::Tr].cycles, 5);
        assert_eq!(r.ledger[Category::Adder].cycles, 3);
    }

    #[test]
    fn b_multiple_of_segment_still_32() {
        let mut e = engine(8, 64);
        let r = e.multiply(op(200, 8), op(192, 8)).unwrap();
        assert_eq!(r.segments_emitted, 3);
        assert_eq!(r.ledger.cycles(), 32);
    }

    #[test]
    fn zero_b_costs_nothing() {
        let mut e = engine(8, 64);
        for a in [0, 77, 255] {
            let r = e.multiply(op(a, 8), op(0, 8)).unwrap();
            assert_eq!(r.count, 0);
            assert_eq!(r.segments_emitted, 0);
            assert_eq!(r.ledger, CostLedger::default());
        }
    }

    #[test]
    fn table_five_dot_products() {
        let mut e = engine(8, 64);
        let two = e.dot_product(&[Term::new(255, 255); 2]).unwrap();
        assert_eq!(two.value, 510);
        assert_eq!(two.ledger.cycles(), 32);
        let five = e.dot_product(&[Term::new(255, 255); 5]).unwrap();
        assert_eq!(five.value, 5 * 255);
        assert_eq!(five.ledger.cycles(), 34);
    }

    #[test]
    fn small_exhaustive_both_layouts() {
        for n in 4..=6 {
            for s in 2..n {
                let p = 1 << s;
                if p > 64 {
                    continue;
                }
                let mut e = engine(n, p);
                for a in 0..1u32 << n {
                    for b in 0..1u32 << n {
                        let want = mul_reference(op(a, n), op(b, n)).unwrap();
                        assert_eq!(e.multiply(op(a, n), op(b, n)).unwrap().count, want);
                        let c = e.multiply_seed_compressed(op(a, n), op(b, n)).unwrap();
                        assert_eq!(c.count, want, "n={n} p={p} a={a} b={b}");
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_single_cycles_match_simulation() {
        let mut e = engine(8, 16);
        let cfg = e.config().clone();
        for (a, b) in [(255, 255), (1, 1), (77, 200), (128, 16), (3, 100), (250, 0)] {
            let q = make_quadruple(&compress(op(a, 8), 4).unwrap(), op(b, 8)).unwrap();
            let u = e.multiply(op(a, 8), op(b, 8)).unwrap().ledger.cycles();
            let c = e.multiply_seed_compressed(op(a, 8), op(b, 8)).unwrap().ledger.cycles();
            assert_eq!(cfg.uncompressed_single_cycles(&q), Some(u), "a={a} b={b}");
            assert_eq!(cfg.compressed_single_cycles(&q), Some(c), "a={a} b={b}");
        }
    }

    #[test]
    fn seed_compression_counter_nine() {
        // P = 4, seed 111, counter 9
        let mut e = engine(8, 4);
        let a = op(0b11_000101, 8);
        let b = op(9 * 4 + 2, 8);
        let r = e.multiply_seed_compressed(a, b).unwrap();
        assert_eq!(r.count, mul_reference(a, b).unwrap());
        assert_eq!(r.ledger[Category::Tr].ops, 1 + 2 + 1);
    }

    #[test]
    fn small_counter_compressed_is_flagged() {
        let mut e = engine(8, 64);
        let r = e.multiply_seed_compressed(op(255, 8), op(255, 8)).unwrap();
        let u = e.multiply(op(255, 8), op(255, 8)).unwrap();
        assert_eq!(r.count, u.count);
        assert!(r.ledger.cycles() > u.ledger.cycles());
        assert_eq!(r.ledger.slow_compressed, 1);

        let mut e4 = engine(8, 4);
        let big = e4.multiply_seed_compressed(op(255, 8), op(255, 8)).unwrap();
        let plain = e4.multiply(op(255, 8), op(255, 8)).unwrap();
        assert!(big.ledger.cycles() < plain.ledger.cycles());
        assert_eq!(big.ledger.slow_compressed, 0);
    }

    #[test]
    fn signed_dot_product() {
        let mut cfg = MacConfig::new(8, 16).unwrap();
        cfg.signed = true;
        let mut e = MacEngine::new(cfg).unwrap();
        let terms = [Term::signed(200, 100, 1), Term::signed(50, 255, -1), Term::new(7, 9)];
        let want: i64 = terms
            .iter()
            .map(|t| t.sign as i64 * mul_reference(op(t.a, 8), op(t.b, 8)).unwrap() as i64)
            .sum();
        let r = e.dot_product(&terms).unwrap();
        assert_eq!(r.value, want);
        assert_eq!(r.value, r.positive as i64 - r.negative as i64);

        let mut plain = engine(8, 16);
        assert_eq!(plain.dot_product(&[Term::signed(1, 1, -1)]), Err(Error::SignedDisabled));
        assert_eq!(plain.dot_product(&[]), Err(Error::Empty));
    }

    #[test]
    fn many_rounds_accumulate() {
        let mut e = engine(8, 4);
        let terms: Vec<Term> = (0..400).map(|i| Term::new(255 - i % 7, 250 + i % 5)).collect();
        let want: u64 =
            terms.iter().map(|t| mul_reference(op(t.a, 8), op(t.b, 8)).unwrap()).sum();
        let r = e.dot_product(&terms).unwrap();
        assert!(r.rounds > 1);
        assert_eq!(r.value as u64, want);
    }

    #[test]
    fn two_pair_unit_op_dot_product() {
        let cfg = MacConfig::unit_op(5, 4).unwrap();
        let mut e = MacEngine::new(cfg).unwrap();
        let terms = [Term::new(21, 19), Term::new(13, 15)];
        let tr = e.dot_product(&terms).unwrap();
        assert_eq!(tr.segments_emitted, 9);
        assert_eq!(tr.ledger.cycles(), 18);
        let apc = e.baseline_apc_dot(&terms).unwrap();
        assert_eq!(apc.value, tr.value);
        assert_eq!(apc.ledger.cycles(), 35);
    }

    #[test]
    fn stream_matches_oracle_and_scales_with_segments() {
        let terms: Vec<Term> =
            (0..500u32).map(|i| Term::new((i * 37) % 256, 1 + (i * 11) % 60)).collect();
        let want: u64 =
            terms.iter().map(|t| mul_reference(op(t.a, 8), op(t.b, 8)).unwrap()).sum();
        let mut last = 0;
        for p in [64, 32, 16, 8, 4] {
            let r = engine(8, p).stream(&terms).unwrap();
            assert_eq!(r.value as u64, want, "P={p}");
            assert!(r.ledger.cycles() > last, "P={p}");
            last = r.ledger.cycles();
        }
    }

    #[test]
    fn stream_signed() {
        let mut cfg = MacConfig::new(8, 8).unwrap();
        cfg.signed = true;
        let terms: Vec<Term> = (0..100u32)
            .map(|i| Term::signed((i * 91) % 256, (i * 53) % 256, if i % 3 == 0 { -1 } else { 1 }))
            .collect();
        let want: i64 = terms
            .iter()
            .map(|t| t.sign as i64 * mul_reference(op(t.a, 8), op(t.b, 8)).unwrap() as i64)
            .sum();
        assert_eq!(MacEngine::new(cfg).unwrap().stream(&terms).unwrap().value, want);
    }

    #[test]
    fn tree_add_examples() {
        let cfg = MacConfig::default();
        let (s, l) = tree_add(&[1, 2, 3, 4, 5, 6, 7, 8], &cfg);
        assert_eq!(s, 36);
        assert_eq!(l[Category::Adder].ops, 7);
        let (s1, l1) = tree_add(&[9], &cfg);
        assert_eq!((s1, l1.cycles()), (9, 0));
    }

    #[test]
    fn apc_is_oblivious_to_b() {
        let e = engine(8, 64);
        let r = e.baseline_apc_multiply(op(100, 8), op(0, 8)).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(r.ledger[Category::Read].ops, 256);
        assert!(r.ledger.cycles() >= 256);
    }

    #[test]
    fn pipelined_is_not_slower() {
        let mut cfg = MacConfig::new(8, 4).unwrap();
        let mut base = MacEngine::new(cfg.clone()).unwrap();
        cfg.pipelined = true;
        let mut pipe = MacEngine::new(cfg).unwrap();
        let a = base.multiply(op(255, 8), op(255, 8)).unwrap();
        let b = pipe.multiply(op(255, 8), op(255, 8)).unwrap();
        assert_eq!(a.count, b.count);
        assert!(b.ledger.cycles() < a.ledger.cycles());
    }

    #[test]
    fn unsupported_parallelism() {
        assert_eq!(MacConfig::new(8, 2).unwrap_err(), Error::BadParallelism(2));
        assert_eq!(MacConfig::new(8, 12).unwrap_err(), Error::BadParallelism(12));
        assert!(MacConfig::new(6, 64).is_err());
    }
}
