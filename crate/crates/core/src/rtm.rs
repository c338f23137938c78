//! Behavioral racetrack-memory model.
//!
//! A track is laid out as alternating constant-0 boundary domains and parts of
//! `valid_per_part` data domains:
//!
//! ```text
//! | b | v v v v v | b | v v v v v | b | ... | b |
//!   0   1 ... 5     6   7 ... 11   12
//! ```
//!
//! With 32 parts of 5 domains that uses 193 of the 256 domains. A transverse
//! read spans one part plus its two boundaries and returns the number of ones.
//! Neighbouring parts share a boundary domain and cannot be read in the same
//! wave, so reading every part takes an even wave and an odd wave.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bits::BitSeq;
use crate::error::{Error, Result};
use crate::ledger::{Category, CostLedger};

/// How Table-style per-operation energies are multiplied out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyGranularity {
    /// One charge per issued shift/write command, however many tracks it spans.
    PerCommand,
    /// One charge per track (per written cell for writes).
    PerTrack,
}

impl std::str::FromStr for EnergyGranularity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_command" | "command" => Ok(Self::PerCommand),
            "per_track" | "track" => Ok(Self::PerTrack),
            _ => Err(Error::Config(format!("unknown energy granularity '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RtmConfig {
    pub domains_per_track: usize,
    pub parts_per_track: usize,
    pub valid_per_part: usize,
    pub trd_domains: usize,
    pub ports_per_track: usize,
    pub tracks_per_dbc: usize,
    pub shift_cycles: u64,
    pub write_cycles: u64,
    pub tr_cycles: u64,
    pub read_cycles: u64,
    pub shift_energy_pj: f64,
    pub write_energy_pj: f64,
    pub tr_energy_pj: f64,
    pub read_energy_pj: f64,
    /// Alignment shifts issued before every write command.
    pub shifts_per_write: u64,
    pub energy_granularity: EnergyGranularity,
    /// Standard deviation (in ones) of the optional noisy-TR mode; 0 disables it.
    pub tr_noise_sigma: f64,
    pub tr_noise_seed: u64,
}

impl Default for RtmConfig {
    fn default() -> Self {
        RtmConfig {
            domains_per_track: 256,
            parts_per_track: 32,
            valid_per_part: 5,
            trd_domains: 7,
            ports_per_track: 33,
            tracks_per_dbc: 32,
            shift_cycles: 2,
            write_cycles: 2,
            tr_cycles: 5,
            read_cycles: 2,
            shift_energy_pj: 0.3,
            write_energy_pj: 0.1,
            tr_energy_pj: 0.175,
            read_energy_pj: 0.1,
            shifts_per_write: 1,
            energy_granularity: EnergyGranularity::PerCommand,
            tr_noise_sigma: 0.0,
            tr_noise_seed: 0,
        }
    }
}

impl RtmConfig {
    /// Domains actually used: parts plus one boundary on each side of every part.
    pub fn used_domains(&self) -> usize {
        self.parts_per_track * (self.valid_per_part + 1) + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.parts_per_track == 0 || self.valid_per_part == 0 {
            return bad("parts_per_track and valid_per_part must be positive".into());
        }
        if self.valid_per_part > 64 {
            return bad("valid_per_part above 64 is not supported".into());
        }
        if self.used_domains() > self.domains_per_track {
            return bad(format!(
                "{} used domains exceed {} per track",
                self.used_domains(),
                self.domains_per_track
            ));
        }
        if self.trd_domains != self.valid_per_part + 2 {
            return bad(format!(
                "trd_domains {} must equal valid_per_part + 2 = {}",
                self.trd_domains,
                self.valid_per_part + 2
            ));
        }
        if self.ports_per_track != self.parts_per_track + 1 {
            return bad(format!(
                "ports_per_track {} must equal parts_per_track + 1",
                self.ports_per_track
            ));
        }
        if !self.tracks_per_dbc.is_power_of_two() {
            return bad("tracks_per_dbc must be a power of two".into());
        }
        for (k, v) in [
            ("shift_energy_pj", self.shift_energy_pj),
            ("write_energy_pj", self.write_energy_pj),
            ("tr_energy_pj", self.tr_energy_pj),
            ("read_energy_pj", self.read_energy_pj),
            ("tr_noise_sigma", self.tr_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    /// Domain index of valid slot `slot` in part `part`.
    #[inline]
    pub fn slot_domain(&self, part: usize, slot: usize) -> usize {
        part * (self.valid_per_part + 1) + 1 + slot
    }

    #[inline]
    pub fn boundary_domain(&self, i: usize) -> usize {
        i * (self.valid_per_part + 1)
    }

    fn command_units(&self, cells: usize) -> u64 {
        match self.energy_granularity {
            EnergyGranularity::PerCommand => 1,
            EnergyGranularity::PerTrack => cells as u64,
        }
    }
}

/// One bit destined for the next free slot of `(track, part)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub track: usize,
    pub part: usize,
    pub bit: bool,
}

/// A domain block cluster: tracks shifted and accessed together.
#[derive(Debug, Clone)]
pub struct RtmDbc {
    cfg: RtmConfig,
    domains: Vec<BitSeq>,
    fill: Vec<Vec<u8>>,
    offset: i64,
    ledger: CostLedger,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
}

impl RtmDbc {
    pub fn new(cfg: RtmConfig, tracks: usize) -> Result<Self> {
        cfg.validate()?;
        if tracks == 0 {
            return Err(Error::Config("a DBC needs at least one track".into()));
        }
        let noise = (cfg.tr_noise_sigma > 0.0).then(|| {
            (
                ChaCha8Rng::seed_from_u64(cfg.tr_noise_seed),
                Normal::new(0.0, cfg.tr_noise_sigma).expect("sigma validated"),
            )
        });
        Ok(RtmDbc {
            domains: vec![BitSeq::zeros(cfg.domains_per_track); tracks],
            fill: vec![vec![0; cfg.parts_per_track]; tracks],
            offset: 0,
            ledger: CostLedger::default(),
            noise,
            cfg,
        })
    }

    pub fn config(&self) -> &RtmConfig {
        &self.cfg
    }

    pub fn tracks(&self) -> usize {
        self.domains.len()
    }

    pub fn parts(&self) -> usize {
        self.cfg.parts_per_track
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> CostLedger {
        std::mem::take(&mut self.ledger)
    }

    fn check(&self, track: usize, part: usize) -> Result<()> {
        if track >= self.tracks() {
            return Err(Error::BadTrack(track));
        }
        if part >= self.parts() {
            return Err(Error::BadPart(part));
        }
        Ok(())
    }

    /// Slots already written in `(track, part)`.
    pub fn fill(&self, track: usize, part: usize) -> usize {
        self.fill[track][part] as usize
    }

    pub fn domain(&self, track: usize, index: usize) -> bool {
        self.domains[track].get(index)
    }

    pub fn part_bits(&self, track: usize, part: usize) -> Vec<bool> {
        (0..self.cfg.valid_per_part)
            .map(|q| self.domains[track].get(self.cfg.slot_domain(part, q)))
            .collect()
    }

    fn part_ones(&self, track: usize, part: usize) -> u32 {
        let d = &self.domains[track];
        (0..self.cfg.valid_per_part).filter(|&q| d.get(self.cfg.slot_domain(part, q))).count()
            as u32
    }

    /// True when every boundary domain on every track is 0.
    pub fn boundaries_clear(&self) -> bool {
        self.domains.iter().all(|d| {
            (0..=self.cfg.parts_per_track).all(|i| !d.get(self.cfg.boundary_domain(i)))
        })
    }

    /// Writes each cell's bit into the next free slot of its part, as one
    /// lockstep write command preceded by the configured alignment shifts.
    pub fn write_cells(&mut self, cells: &[Cell]) -> Result<()> {
        for c in cells {
            self.check(c.track, c.part)?;
            if self.fill(c.track, c.part) >= self.cfg.valid_per_part {
                return Err(Error::PartOverflow { track: c.track, part: c.part });
            }
        }
        let mut keys: Vec<(usize, usize)> = cells.iter().map(|c| (c.track, c.part)).collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateCell { track: w[0].0, part: w[0].1 });
        }
        if cells.is_empty() {
            return Ok(());
        }
        for c in cells {
            self.put(c.track, c.part, c.bit);
        }
        self.charge_write(cells.len());
        Ok(())
    }

    fn put(&mut self, track: usize, part: usize, bit: bool) {
        let slot = self.fill[track][part] as usize;
        let d = self.cfg.slot_domain(part, slot);
        self.domains[track].set(d, bit);
        self.fill[track][part] += 1;
    }

    /// One lockstep write command over whole columns: bit `i` of each segment
    /// goes to track `i` at the next free slot of the paired part.
    pub fn write_columns(&mut self, cols: &[(usize, &BitSeq)]) -> Result<()> {
        let mut parts: Vec<usize> = Vec::with_capacity(cols.len());
        for &(part, seg) in cols {
            if part >= self.parts() {
                return Err(Error::BadPart(part));
            }
            if seg.len() != self.tracks() {
                return Err(Error::SegmentLength { got: seg.len(), expected: self.tracks() });
            }
            if let Some(track) =
                (0..self.tracks()).find(|&t| self.fill(t, part) >= self.cfg.valid_per_part)
            {
                return Err(Error::PartOverflow { track, part });
            }
            parts.push(part);
        }
        parts.sort_unstable();
        if let Some(w) = parts.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateCell { track: 0, part: w[0] });
        }
        if cols.is_empty() {
            return Ok(());
        }
        for &(part, seg) in cols {
            for t in 0..self.tracks() {
                self.put(t, part, seg.get(t));
            }
        }
        self.charge_write(cols.len() * self.tracks());
        Ok(())
    }

    fn charge_write(&mut self, cells: usize) {
        let units = self.cfg.command_units(cells);
        let sh = self.cfg.shifts_per_write;
        if sh > 0 {
            self.ledger.charge(
                Category::Shift,
                sh * units,
                sh * self.cfg.shift_cycles,
                (sh * units) as f64 * self.cfg.shift_energy_pj,
            );
        }
        self.ledger.charge(
            Category::Write,
            units,
            self.cfg.write_cycles,
            units as f64 * self.cfg.write_energy_pj,
        );
    }

    /// Writes bit `i` of `segment` to track `i` of `part`.
    pub fn write_transposed(&mut self, part: usize, segment: &BitSeq) -> Result<()> {
        if segment.len() != self.tracks() {
            return Err(Error::SegmentLength { got: segment.len(), expected: self.tracks() });
        }
        self.write_columns(&[(part, segment)])
    }

    /// Writes zeros into every free slot of the listed parts on every track.
    /// Each remaining slot position costs one write command.
    pub fn pad_parts(&mut self, parts: &[usize]) -> Result<()> {
        loop {
            let cells: Vec<Cell> = parts
                .iter()
                .flat_map(|&part| (0..self.tracks()).map(move |track| (track, part)))
                .filter(|&(t, p)| p < self.parts() && self.fill(t, p) < self.cfg.valid_per_part)
                .map(|(track, part)| Cell { track, part, bit: false })
                .collect();
            if cells.is_empty() {
                return Ok(());
            }
            self.write_cells(&cells)?;
        }
    }

    fn sense(&mut self, track: usize, part: usize) -> u32 {
        let ones = self.part_ones(track, part);
        match &mut self.noise {
            None => ones,
            Some((rng, dist)) => {
                let v = ones as f64 + dist.sample(rng);
                v.round().clamp(0.0, self.cfg.valid_per_part as f64) as u32
            }
        }
    }

    /// Counts the ones in one part of one track.
    pub fn transverse_read(&mut self, track: usize, part: usize) -> Result<u32> {
        self.check(track, part)?;
        let v = self.sense(track, part);
        self.ledger.charge(Category::Tr, 1, self.cfg.tr_cycles, self.cfg.tr_energy_pj);
        Ok(v)
    }

    /// One concurrent TR wave. Two cells on the same track may not be
    /// neighbouring parts.
    pub fn tr_wave(&mut self, cells: &[(usize, usize)]) -> Result<Vec<u32>> {
        for &(t, p) in cells {
            self.check(t, p)?;
        }
        let mut sorted = cells.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 && w[1].1 == w[0].1 + 1 {
                return Err(Error::AdjacentTr(w[0].1, w[1].1));
            }
        }
        if cells.is_empty() {
            return Ok(Vec::new());
        }
        let counts = cells.iter().map(|&(t, p)| self.sense(t, p)).collect();
        self.ledger.charge(
            Category::Tr,
            cells.len() as u64,
            self.cfg.tr_cycles,
            cells.len() as f64 * self.cfg.tr_energy_pj,
        );
        Ok(counts)
    }

    /// Reads the given parts on every track using the ping-pong schedule and
    /// returns `counts[i][track]` for `parts[i]`.
    pub fn tr_parts(&mut self, parts: &[usize]) -> Result<Vec<Vec<u32>>> {
        let mut out = vec![Vec::new(); parts.len()];
        for wave in ping_pong(parts) {
            let cells: Vec<(usize, usize)> = wave
                .iter()
                .flat_map(|&i| (0..self.tracks()).map(move |t| (t, parts[i])))
                .collect();
            let counts = self.tr_wave(&cells)?;
            for (k, &i) in wave.iter().enumerate() {
                let n = self.tracks();
                out[i] = counts[k * n..(k + 1) * n].to_vec();
            }
        }
        Ok(out)
    }

    /// Reads every part of every track in two waves; `counts[track][part]`.
    pub fn tr_all_parts(&mut self) -> Result<Vec<Vec<u32>>> {
        let parts: Vec<usize> = (0..self.parts()).collect();
        let by_part = self.tr_parts(&parts)?;
        Ok((0..self.tracks()).map(|t| by_part.iter().map(|c| c[t]).collect()).collect())
    }

    /// Forgets the contents of the listed parts. The next round overwrites
    /// every slot, so this carries no cost.
    pub fn clear_parts(&mut self, parts: &[usize]) {
        for t in 0..self.tracks() {
            for &p in parts {
                for q in 0..self.cfg.valid_per_part {
                    let d = self.cfg.slot_domain(p, q);
                    self.domains[t].set(d, false);
                }
                self.fill[t][p] = 0;
            }
        }
    }

    /// Like [`clear_parts`](Self::clear_parts) for a single track.
    pub fn clear_parts_on_track(&mut self, track: usize, parts: &[usize]) {
        for &p in parts {
            for q in 0..self.cfg.valid_per_part {
                let d = self.cfg.slot_domain(p, q);
                self.domains[track].set(d, false);
            }
            self.fill[track][p] = 0;
        }
    }

    /// Moves all tracks by `steps` domains. The offset must stay within the
    /// spare region `[0, domains_per_track - used_domains]`.
    pub fn shift(&mut self, steps: i64) -> Result<()> {
        let max = (self.cfg.domains_per_track - self.cfg.used_domains()) as i64;
        let target = self.offset + steps;
        if !(0..=max).contains(&target) {
            return Err(Error::ShiftOutOfBounds { offset: target, max });
        }
        if steps == 0 {
            return Ok(());
        }
        self.offset = target;
        let n = steps.unsigned_abs();
        let units = n * self.cfg.command_units(self.tracks());
        self.ledger.charge(
            Category::Shift,
            units,
            n * self.cfg.shift_cycles,
            units as f64 * self.cfg.shift_energy_pj,
        );
        Ok(())
    }

    /// Conventional single-domain read through a port.
    pub fn read_slot(&mut self, track: usize, part: usize, slot: usize) -> Result<bool> {
        self.check(track, part)?;
        if slot >= self.cfg.valid_per_part {
            return Err(Error::IndexOutOfRange { index: slot, len: self.cfg.valid_per_part });
        }
        self.ledger.charge(Category::Read, 1, self.cfg.read_cycles, self.cfg.read_energy_pj);
        Ok(self.domains[track].get(self.cfg.slot_domain(part, slot)))
    }
}

/// Splits part positions into TR waves: even part indices, then odd ones.
/// Returns indices into `parts`; empty waves are dropped.
pub fn ping_pong(parts: &[usize]) -> Vec<Vec<usize>> {
    let even: Vec<usize> = (0..parts.len()).filter(|&i| parts[i] % 2 == 0).collect();
    let odd: Vec<usize> = (0..parts.len()).filter(|&i| parts[i] % 2 == 1).collect();
    [even, odd].into_iter().filter(|w| !w.is_empty()).collect()
}
