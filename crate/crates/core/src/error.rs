use thiserror::Error;

/// Everything that can go wrong inside the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("width {0} outside supported range 1..=16")]
    WidthOutOfRange(u32),

    #[error("value {value} does not fit in {width} bits")]
    ValueOutOfRange { value: u64, width: u32 },

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operand widths differ: {0} vs {1}")]
    WidthMismatch(u32, u32),

    #[error("segment exponent {seg_exp} invalid for width {width} (need 1..={max})", max = width.saturating_sub(1))]
    SegExpOutOfRange { seg_exp: u32, width: u32 },

    #[error("parallelism {0} is not a supported power of two")]
    BadParallelism(u32),

    #[error("part {part} on track {track} has no free valid domain")]
    PartOverflow { track: usize, part: usize },

    #[error("part index {0} out of range")]
    BadPart(usize),

    #[error("track index {0} out of range")]
    BadTrack(usize),

    #[error("segment length {got} does not match {expected} tracks")]
    SegmentLength { got: usize, expected: usize },

    #[error("shift to offset {offset} leaves track bounds [0, {max}]")]
    ShiftOutOfBounds { offset: i64, max: i64 },

    #[error("adjacent parts {0} and {1} scheduled in the same transverse-read wave")]
    AdjacentTr(usize, usize),

    #[error("cell (track {track}, part {part}) written twice in one operation")]
    DuplicateCell { track: usize, part: usize },

    #[error("empty input")]
    Empty,

    #[error("negative product requires signed mode")]
    SignedDisabled,

    #[error("zero total energy")]
    ZeroEnergy,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("line {line}: {msg}")]
    Input { line: u64, msg: String },

    #[error("{0}")]
    Data(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
