//! Bit sequences.
//!
//! * [`DynBitVec`] — the workhorse dynamic bit sequence: leaves of packed
//!   words or run-coded fills, indexed by a two-array Fenwick summary.
//! * [`RunLenBitVec`] — a static run-length coded sequence for bit strings
//!   with few zeros, supporting fast substring extraction.
//! * [`SectoredBitVec`] — a bit sequence split into sectors with an
//!   incremental copy-and-replace protocol for background rebuilding.

mod dynamic;
mod runlen;
mod sector;

pub use dynamic::DynBitVec;
pub(crate) use dynamic::{varint_len, write_varint};
pub use runlen::RunLenBitVec;
pub use sector::{CopyStage, SectorCopy, SectoredBitVec};
