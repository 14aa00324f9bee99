//! Compressed dynamic sequences.
//!
//! The crate is organized in layers, each usable on its own:
//!
//! * [`bitvec`] — dynamic bit sequences with rank/select, a run-length
//!   compressed bit sequence for skewed inputs, and sectored bit sequences
//!   with an incremental copy-and-swap protocol.
//! * [`order`] — an order-maintenance list with O(1) order comparison and a
//!   prefix-count index over list entries.
//! * [`colored`] — colored predecessor queries over an ordered list.
//! * [`dstr`] — dynamic strings: a list-backed string for small lengths and a
//!   chunked string that scales to large lengths with background chunk
//!   splitting.
//! * [`sseq`] — a static entropy-compressed sequence with rank/select/access
//!   and an incremental builder.
//! * [`cseq`] — the fully dynamic compressed sequence combining a dynamic
//!   front buffer with static sections, lazy deletion and background
//!   migration/purge phases.
//!
//! Position conventions used across the crate: positions are 0-based,
//! `rank(i)` counts matching positions in the half-open prefix `[0, i)`, and
//! `select(j)` takes a 1-based occurrence number and returns a 0-based
//! position. Under these conventions `rank(select(j)) == j - 1` and
//! `rank(select(j) + 1) == j`.

pub mod bench;
pub mod bitvec;
pub mod colored;
pub mod config;
pub mod cseq;
pub mod dstr;
pub mod entropy;
pub mod error;
pub mod naive;
pub mod ops_count;
pub mod order;
pub mod sseq;
pub mod textgen;

mod bits;

pub use config::CoreConfig;
pub use error::{Error, Result};
