//! Per-category operation, cycle, and energy accounting.

use std::fmt;
use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Shift,
    Write,
    Tr,
    Read,
    OutputLogic,
    Adder,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Shift,
        Category::Write,
        Category::Tr,
        Category::Read,
        Category::OutputLogic,
        Category::Adder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Shift => "shift",
            Category::Write => "write",
            Category::Tr => "tr",
            Category::Read => "read",
            Category::OutputLogic => "output_logic",
            Category::Adder => "adder",
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bucket {
    pub ops: u64,
    pub cycles: u64,
    pub energy_pj: f64,
}

/// Accumulated costs. `E_C` is the output logic, `E_R` the racetrack
/// operations (shift, write, TR, read), `E_A` the adders.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    buckets: [Bucket; 6],
    /// Seed-compressed multiplications whose counter was below the
    /// break-even point, i.e. that ran slower than the uncompressed layout.
    pub slow_compressed: u64,
}

impl Index<Category> for CostLedger {
    type Output = Bucket;
    fn index(&self, c: Category) -> &Bucket {
        &self.buckets[c.idx()]
    }
}

impl IndexMut<Category> for CostLedger {
    fn index_mut(&mut self, c: Category) -> &mut Bucket {
        &mut self.buckets[c.idx()]
    }
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, cat: Category, ops: u64, cycles: u64, energy_pj: f64) {
        debug_assert!(energy_pj >= 0.0);
        let b = &mut self[cat];
        b.ops += ops;
        b.cycles += cycles;
        b.energy_pj += energy_pj;
    }

    pub fn cycles(&self) -> u64 {
        self.buckets.iter().map(|b| b.cycles).sum()
    }

    pub fn energy_pj(&self) -> f64 {
        self.buckets.iter().map(|b| b.energy_pj).sum()
    }

    pub fn e_c(&self) -> f64 {
        self[Category::OutputLogic].energy_pj
    }

    pub fn e_r(&self) -> f64 {
        [Category::Shift, Category::Write, Category::Tr, Category::Read]
            .iter()
            .map(|&c| self[c].energy_pj)
            .sum()
    }

    pub fn e_a(&self) -> f64 {
        self[Category::Adder].energy_pj
    }

    /// Sequential composition: everything adds.
    pub fn merge(&mut self, other: &CostLedger) {
        for c in Category::ALL {
            let o = other[c];
            self.charge(c, o.ops, o.cycles, o.energy_pj);
        }
        self.slow_compressed += other.slow_compressed;
    }

    pub fn merged(mut self, other: &CostLedger) -> CostLedger {
        self.merge(other);
        self
    }

    /// Lockstep composition of lanes running side by side: ops and energy
    /// add, latency per category is the slowest lane.
    pub fn parallel<'a>(lanes: impl IntoIterator<Item = &'a CostLedger>) -> CostLedger {
        let mut out = CostLedger::default();
        for lane in lanes {
            for c in Category::ALL {
                let o = lane[c];
                let b = &mut out[c];
                b.ops += o.ops;
                b.energy_pj += o.energy_pj;
                b.cycles = b.cycles.max(o.cycles);
            }
            out.slow_compressed += lane.slow_compressed;
        }
        out
    }

    /// CSV with columns `category,ops,cycles,energy_pj` plus a `total` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("category,ops,cycles,energy_pj\n");
        for c in Category::ALL {
            let b = self[c];
            s.push_str(&format!("{},{},{},{:.6}\n", c, b.ops, b.cycles, b.energy_pj));
        }
        let ops: u64 = self.buckets.iter().map(|b| b.ops).sum();
        s.push_str(&format!("total,{},{},{:.6}\n", ops, self.cycles(), self.energy_pj()));
        s
    }
}
