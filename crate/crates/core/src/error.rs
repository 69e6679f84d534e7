use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hex bitstring {0:?}")]
    InvalidHex(String),

    #[error("invalid tag: {0}")]
    InvalidTag(String),

    #[error("invalid select command: {0}")]
    InvalidCommand(String),

    /// A chain of selects that a reader would refuse to send.
    #[error("invalid command chain: {0}")]
    InvalidChain(String),

    #[error("invalid tash parameters: {0}")]
    InvalidParams(String),

    #[error("tag {epc}: user bank holds {available} bits but {required} are needed")]
    DigestNotProvisioned {
        epc: String,
        required: usize,
        available: usize,
    },

    #[error("tag {tag}: digest of {len} bits exceeds the {capacity}-bit user bank")]
    CapacityExceeded {
        tag: usize,
        len: usize,
        capacity: usize,
    },

    #[error("tag index {0} out of range")]
    NoSuchTag(usize),

    #[error("entry index {index} invalid for a table of {size} entries")]
    InvalidEntry { index: u64, size: u64 },

    #[error("duplicate entry index {0}")]
    DuplicateEntry(u64),

    #[error("table has unknown entries")]
    UnknownEntries,

    #[error("estimator saturated: no empty slot in a bitmap of {0}")]
    Saturated(usize),

    #[error("infeasible plan: {0}")]
    Infeasible(String),

    #[error("residual entry {entry} is negative ({value})")]
    Integrity { entry: usize, value: i64 },

    #[error("device limit exceeded: {0}")]
    DeviceLimit(String),

    #[error("malformed document: {0}")]
    Document(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
