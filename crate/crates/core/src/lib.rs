//! Simulator for a transverse-read assisted low-discrepancy stochastic
//! computing multiply-accumulate unit built on racetrack memory.

pub mod bits;
pub mod codec;
pub mod config;
pub mod cost;
pub mod error;
pub mod ledger;
pub mod mac;
pub mod mlp;
pub mod pfc;
pub mod rtm;
pub mod workload;

pub use bits::BitSeq;
pub use codec::{encode_sn, encode_un, mul_reference, BinaryOperand, StochasticSeq, UnarySeq};
pub use error::{Error, Result};
pub use ledger::{Category, CostLedger};
pub use mac::{DotResult, MacConfig, MacEngine, MacResult, Term};
pub use pfc::{compress, decompress, make_quadruple, PfcCode, Quadruple};
pub use rtm::{RtmConfig, RtmDbc};
pub use workload::{DistributionSpec, TraceRecord, Workload};
