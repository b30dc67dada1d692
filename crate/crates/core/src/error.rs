use thiserror::Error;

/// Errors raised by the simulator building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidArray(String),

    #[error("channel computation requested between two arrays of node {0}")]
    SameNode(u32),

    #[error("partition index {index} out of range (node has {count} partitions)")]
    PartitionOutOfRange { index: usize, count: usize },

    #[error("channel matrix entry does not match the requested link: {0}")]
    KeyMismatch(String),

    #[error("{name} = {value} is outside the valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("number of active streams must be 1 or 2, got {0}")]
    InvalidStreamCount(usize),

    #[error("MCS index {0} is not in the table")]
    InvalidMcs(u8),

    #[error("stream {stream} already used all {max} transmissions of its transport block")]
    HarqExhausted { stream: usize, max: u8 },

    #[error("no active stream to compute a rank indicator from")]
    NoActiveStream,

    #[error("unknown RNTI {0}")]
    UnknownRnti(u16),

    #[error("HARQ process {pid} of RNTI {rnti} is not in use")]
    UnknownHarqProcess { rnti: u16, pid: u8 },

    #[error("HARQ feedback for stream {stream} does not match the scheduled streams")]
    FeedbackMismatch { stream: usize },

    #[error("invalid transport block size arguments: {0}")]
    InvalidTbsArgs(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("accounting mismatch at end of run: {0}")]
    Conservation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
