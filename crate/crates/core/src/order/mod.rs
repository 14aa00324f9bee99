//! Order maintenance and positional indexing over linked lists.
//!
//! [`OrderedList`] answers "does entry x precede entry y" in O(1) through a
//! two-level tag scheme; [`PrefixIndex`] is a balanced B-tree over list
//! entries answering rank (position of an entry) and select (entry at a
//! position) in O(log m / log B).

pub mod list;
pub mod prefix;

pub use list::{Handle, OrderedList};
pub use prefix::PrefixIndex;
