//! Thread-local basic-operation counter.
//!
//! Every structural primitive (tree node visit, leaf word move, coded-stream
//! step) bumps this counter by a small constant. The counter backs the
//! worst-case update bound tests and the `bench` worst-case report: callers
//! reset it, run one operation, and read the delta.

use std::cell::Cell;

thread_local! {
    static OPS: Cell<u64> = const { Cell::new(0) };
}

/// Adds `n` basic operations to the thread-local counter.
#[inline]
pub fn bump(n: u64) {
    OPS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Returns the current counter value.
pub fn get() -> u64 {
    OPS.with(|c| c.get())
}

/// Resets the counter to zero.
pub fn reset() {
    OPS.with(|c| c.set(0));
}

/// Runs `f` and returns its result together with the basic operations it consumed.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = get();
    let out = f();
    (out, get().wrapping_sub(before))
}
