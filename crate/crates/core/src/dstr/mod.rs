//! Dynamic strings in two layers.
//!
//! [`ListString`] keeps a small string as a colored list plus positional
//! indexes, spending O(log m) time per operation and O(m log m) bits; it
//! serves as the per-chunk engine. [`ChunkedString`] scales to large
//! strings by splitting them into chunks of a few hundred to a few
//! thousand symbols, with per-symbol run-length bitvectors gluing chunk
//! counts into global rank/select, and incremental chunk splitting and
//! global rebuilding keeping chunk sizes in range without update spikes.

mod chunked;
mod list_string;

pub use chunked::{ChunkedString, ChunkedStats};
pub use list_string::ListString;
