use thiserror::Error;

/// Errors surfaced by fallible operations across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {pos} out of range for length {len}")]
    OutOfRange { pos: usize, len: usize },
    #[error("occurrence {occ} out of range: only {count} available")]
    OccurrenceOutOfRange { occ: usize, count: usize },
    #[error("symbol {sym} out of range for alphabet size {sigma}")]
    SymbolOutOfRange { sym: u64, sigma: u64 },
    #[error("invalid or stale handle")]
    InvalidHandle,
    #[error("a sector copy is already pending on sector {0}")]
    CopyPending(usize),
    #[error("no completed sector copy to install")]
    NoCopyReady,
    #[error("corrupt serialized data: {0}")]
    Corrupt(String),
    #[error("structural audit failed: {0}")]
    AuditFailed(String),
    #[error("chunk exceeded hard size cap: {0}")]
    ChunkOverflow(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
